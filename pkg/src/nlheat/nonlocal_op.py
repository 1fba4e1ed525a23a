"""The nonlocal operator L u = J*u - u and its rescaled family.

Two convolution engines are provided: a direct summation oracle with a
deterministic (lexicographic) accumulation order, and a fast cyclic engine
based on real FFTs of a padded copy of the field.  The pad is wide enough
that cyclic wraparound never reaches physical nodes, so the two engines
agree to roundoff and the direct engine can serve as a bit-reproducible
oracle for the fast one.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
import scipy.fft

from .errors import ResolutionError
from .field import Field, Grid, PERIODIC, PowerTail, ZeroTail
from .kernels import DiscreteStencil, KernelSpec, sample_on_grid, scaled_kernel

__all__ = [
    "ConvolutionPlan",
    "make_plan",
    "convolve",
    "apply_L",
    "apply_L_scaled",
    "SmoothTestField",
    "gaussian_test_field",
    "local_limit_residual",
]

FillFn = Callable[[np.ndarray], np.ndarray]


def _next_fast_even(n_min: int, parity: int) -> int:
    """Smallest FFT-friendly size >= n_min with the same parity as ``parity``."""
    n = n_min
    while True:
        n = scipy.fft.next_fast_len(n)
        if (n - parity) % 2 == 0:
            return n
        n += 1


@dataclass
class ConvolutionPlan:
    """Precomputed layout for convolving fields of one grid shape with one stencil.

    The cached stencil transform is workspace confined to a single thread;
    concurrent applications need separate plans.
    """

    grid: Grid
    stencil: DiscreteStencil
    engine: str = "fast"
    check_oracle: bool = False
    pad: int = dc_field(init=False)
    _khat: Optional[np.ndarray] = dc_field(init=False, default=None, repr=False)

    def __post_init__(self):
        if self.engine not in ("direct", "fast"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if abs(self.stencil.h - self.grid.h) > 1e-12 * self.grid.h:
            raise ValueError("stencil spacing does not match grid spacing")
        n = self.grid.n
        r = self.stencil.radius
        total = _next_fast_even(n + 2 * (r + 1), n % 2)
        self.pad = (total - n) // 2

    @property
    def padded_n(self) -> int:
        return self.grid.n + 2 * self.pad

    def _stencil_hat(self) -> np.ndarray:
        if self._khat is None:
            r = self.stencil.radius
            shape = (self.padded_n,) * self.grid.N
            embed = np.zeros(shape)
            idx = np.arange(-r, r + 1) % self.padded_n
            if self.grid.N == 1:
                embed[idx] = self.stencil.values
            else:
                embed[np.ix_(idx, idx)] = self.stencil.values
            self._khat = scipy.fft.rfftn(embed)
        return self._khat


def make_plan(kernel: KernelSpec, grid: Grid, engine: str = "fast",
              check_oracle: bool = False) -> ConvolutionPlan:
    return ConvolutionPlan(grid=grid, stencil=sample_on_grid(kernel, grid.h),
                           engine=engine, check_oracle=check_oracle)


def _padded_axis(grid: Grid, pad: int) -> np.ndarray:
    return -grid.L + (np.arange(-pad, grid.n + pad) + 0.5) * grid.h


def _pad_values(plan: ConvolutionPlan, f: Field, fill: Optional[FillFn]) -> np.ndarray:
    """Field values extended by ``pad`` nodes per side.

    Periodic grids wrap.  Truncated grids evaluate ``fill`` (or the field's
    tail law) at the exterior node coordinates.
    """
    grid, pad, n = plan.grid, plan.pad, plan.grid.n
    if grid.mode == PERIODIC:
        return np.pad(f.values, pad, mode="wrap")
    x = _padded_axis(grid, pad)
    if grid.N == 1:
        if fill is not None:
            out = np.asarray(fill(x), dtype=float).copy()
        else:
            out = f.tail.evaluate(np.abs(x))
        out[pad:pad + n] = f.values
        return out
    gx, gy = np.meshgrid(x, x, indexing="ij")
    if fill is not None:
        out = np.asarray(fill(np.stack([gx, gy], axis=-1)), dtype=float).copy()
    else:
        out = f.tail.evaluate(np.sqrt(gx * gx + gy * gy))
    out[pad:pad + n, pad:pad + n] = f.values
    return out


def _convolve_direct(plan: ConvolutionPlan, upad: np.ndarray) -> np.ndarray:
    s = plan.stencil.values
    r = plan.stencil.radius
    pad, n = plan.pad, plan.grid.n
    hN = plan.grid.cell_volume
    if plan.grid.N == 1:
        out = np.zeros(n)
        for j in range(-r, r + 1):
            out += s[j + r] * upad[pad - j:pad - j + n]
        return out * hN
    out = np.zeros((n, n))
    for j1 in range(-r, r + 1):
        for j2 in range(-r, r + 1):
            w = s[j1 + r, j2 + r]
            if w == 0.0:
                continue
            out += w * upad[pad - j1:pad - j1 + n, pad - j2:pad - j2 + n]
    return out * hN


def _convolve_fast(plan: ConvolutionPlan, upad: np.ndarray) -> np.ndarray:
    khat = plan._stencil_hat()
    shape = upad.shape
    conv = scipy.fft.irfftn(scipy.fft.rfftn(upad) * khat, s=shape)
    pad, n = plan.pad, plan.grid.n
    hN = plan.grid.cell_volume
    if plan.grid.N == 1:
        return conv[pad:pad + n] * hN
    return conv[pad:pad + n, pad:pad + n] * hN


def convolve(plan: ConvolutionPlan, f: Field, fill: Optional[FillFn] = None) -> Field:
    """J*u on the grid of ``f``; exterior values come from the tail law or ``fill``."""
    if f.grid.shape != plan.grid.shape:
        raise ValueError("field shape does not match plan")
    upad = _pad_values(plan, f, fill)
    if plan.engine == "direct":
        out = _convolve_direct(plan, upad)
    else:
        out = _convolve_fast(plan, upad)
        if plan.check_oracle:
            ref = _convolve_direct(plan, upad)
            gap = float(np.max(np.abs(out - ref)))
            if gap > 1e-12:
                raise AssertionError(f"engine mismatch: sup|fast - direct| = {gap:.3e}")
    return f.with_values(out)


def apply_L(plan: ConvolutionPlan, f: Field, fill: Optional[FillFn] = None) -> Field:
    """L u = J*u - u."""
    conv = convolve(plan, f, fill=fill)
    return f.with_values(conv.values - f.values)


def apply_L_scaled(kernel: KernelSpec, lam: float, f: Field,
                   engine: str = "fast", fill: Optional[FillFn] = None) -> Field:
    """L_lam u = lam^2 (J_lam * u - u), with J_lam the rescaled kernel."""
    if lam < 1:
        raise ValueError(f"scaling factor must be >= 1, got {lam}")
    if f.grid.h > kernel.d / (4.0 * lam):
        raise ResolutionError(
            f"h={f.grid.h} does not resolve the scaled support d/lam={kernel.d / lam}")
    plan = make_plan(scaled_kernel(kernel, lam), f.grid, engine=engine)
    conv = convolve(plan, f, fill=fill)
    return f.with_values(lam * lam * (conv.values - f.values))


@dataclass(frozen=True)
class SmoothTestField:
    """A closed-form C^4 test function with its exact Laplacian."""

    func: Callable[[np.ndarray], np.ndarray]
    laplacian: Callable[[np.ndarray], np.ndarray]


def gaussian_test_field(N: int) -> SmoothTestField:
    """g(x) = exp(-|x|^2), with Delta g = (4|x|^2 - 2N) g."""

    def _r2(coords):
        coords = np.asarray(coords, dtype=float)
        if N == 1:
            return coords * coords
        return np.sum(coords * coords, axis=-1)

    def g(coords):
        return np.exp(-_r2(coords))

    def lap(coords):
        r2 = _r2(coords)
        return (4.0 * r2 - 2.0 * N) * np.exp(-r2)

    return SmoothTestField(func=g, laplacian=lap)


def local_limit_residual(kernel: KernelSpec, lam: float, g: SmoothTestField,
                         alpha: float, grid: Grid, engine: str = "fast") -> float:
    """sup over interior nodes of |L_lam g - alpha * Delta g|.

    Interior means distance > d/lam from the box edge, so the convolution
    only ever reads exact samples of g (the pad is filled from the closed
    form as well, for good measure).  The caller checks decay in lam.
    """
    coords = grid.coords()
    f = Field(grid, g.func(coords), tail=ZeroTail())
    lg = apply_L_scaled(kernel, lam, f, engine=engine, fill=g.func)
    target = alpha * g.laplacian(coords)
    x = grid.axis()
    edge = grid.L - np.abs(x)
    margin = kernel.d / lam
    if grid.N == 1:
        interior = edge > margin
    else:
        ex, ey = np.meshgrid(edge, edge, indexing="ij")
        interior = np.minimum(ex, ey) > margin
    if not np.any(interior):
        raise ResolutionError("no interior nodes at distance > d/lam from the edge")
    return float(np.max(np.abs(lg.values - target)[interior]))
