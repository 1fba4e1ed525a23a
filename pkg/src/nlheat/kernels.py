"""Dispersal kernels: smooth, radial, compactly supported, unit mass.

The only family shipped is the normalized bump ``exp(-1/(1 - |x/d|^2))`` on
``|x| < d``.  The family tag exists so tests can register other shapes, but
simulation runs only admit ``"bump"`` (the hypotheses need smoothness).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, ResolutionError

__all__ = [
    "KernelSpec",
    "DiscreteStencil",
    "build_kernel",
    "alpha",
    "scaled_kernel",
    "sample_on_grid",
]


def _bump_profile(r2: np.ndarray) -> np.ndarray:
    """Unnormalized bump as a function of (r/d)^2, zero outside the support."""
    r2 = np.asarray(r2, dtype=float)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


_FAMILIES: dict[str, Callable[[np.ndarray], np.ndarray]] = {"bump": _bump_profile}


@dataclass(frozen=True)
class KernelSpec:
    """An admissible kernel with its normalization and moments.

    ``c`` normalizes the profile to unit mass; ``m2`` is the second moment
    computed by composite midpoint quadrature on a uniform grid over the
    support (the integrand vanishes to all orders at the boundary, so the
    midpoint rule converges fast).
    """

    family: str
    d: float
    N: int
    c: float
    m2: float
    quad_resolution: int

    def evaluate(self, x) -> np.ndarray:
        """Kernel value at points ``x`` (shape (..., N) or scalar radii for N=1)."""
        x = np.asarray(x, dtype=float)
        if self.N == 1:
            r2 = x * x
        else:
            if x.shape[-1] != self.N:
                raise ValueError(f"expected last axis of size {self.N}, got {x.shape}")
            r2 = np.sum(x * x, axis=-1)
        return self.c * _FAMILIES[self.family](r2 / (self.d * self.d))

    def evaluate_radial(self, r) -> np.ndarray:
        """Kernel value at radii ``r`` (always symmetric in r)."""
        r = np.abs(np.asarray(r, dtype=float))
        return self.c * _FAMILIES[self.family]((r / self.d) ** 2)


@dataclass(frozen=True)
class DiscreteStencil:
    """Kernel sampled on a uniform lattice of spacing ``h``.

    Values are renormalized so that ``sum(values) * h**N == 1`` exactly,
    which makes the discrete nonlocal operator annihilate constants to
    machine precision.
    """

    values: np.ndarray
    h: float
    radius: int
    N: int

    @property
    def offsets(self) -> np.ndarray:
        """Lattice offsets i*h along one axis, from -radius to +radius."""
        return self.h * np.arange(-self.radius, self.radius + 1)

    def second_moment(self) -> float:
        """Discrete second moment sum(s_i |x_i|^2) h^N."""
        z = self.offsets
        if self.N == 1:
            r2 = z * z
        else:
            zx, zy = np.meshgrid(z, z, indexing="ij")
            r2 = zx * zx + zy * zy
        return float(np.sum(self.values * r2) * self.h**self.N)


def _support_grid(d: float, n: int) -> tuple[np.ndarray, float]:
    """Midpoint nodes covering [-d, d] with n cells, and the cell width."""
    h = 2.0 * d / n
    return -d + (np.arange(n) + 0.5) * h, h


def _quad_moments(family: str, d: float, N: int, n: int) -> tuple[float, float]:
    """(mass, second moment) of the unnormalized profile by midpoint quadrature."""
    profile = _FAMILIES[family]
    x, h = _support_grid(d, n)
    if N == 1:
        r2 = x * x
        w = h
    else:
        gx, gy = np.meshgrid(x, x, indexing="ij")
        r2 = gx * gx + gy * gy
        w = h * h
    vals = profile(r2 / (d * d))
    mass = float(np.sum(vals) * w)
    m2 = float(np.sum(vals * r2) * w)
    return mass, m2


def build_kernel(family: str = "bump", d: float = 1.0, N: int = 1,
                 quad_resolution: int = 256) -> KernelSpec:
    """Construct a unit-mass kernel; resolution counts quadrature cells across the support."""
    if family not in _FAMILIES:
        raise ConfigError(f"unsupported kernel family {family!r}")
    if N not in (1, 2):
        raise ConfigError(f"unsupported dimension N={N}; only 1 and 2")
    if d <= 0:
        raise ConfigError(f"support radius must be positive, got d={d}")
    if quad_resolution < 64:
        raise ConfigError(
            f"quad_resolution={quad_resolution} too coarse; need >= 64 points across the support")
    mass, m2_raw = _quad_moments(family, d, N, quad_resolution)
    c = 1.0 / mass
    return KernelSpec(family=family, d=float(d), N=N, c=c, m2=c * m2_raw,
                      quad_resolution=quad_resolution)


def alpha(kernel: KernelSpec) -> float:
    """Diffusivity of the local limit: m2 / (2N)."""
    return kernel.m2 / (2.0 * kernel.N)


def scaled_kernel(kernel: KernelSpec, lam: float) -> KernelSpec:
    """The rescaled kernel z -> lam^N * J(lam*z): support d/lam, unit mass, m2/lam^2."""
    if lam <= 0:
        raise ValueError(f"scaling factor must be positive, got {lam}")
    return KernelSpec(
        family=kernel.family,
        d=kernel.d / lam,
        N=kernel.N,
        c=kernel.c * lam**kernel.N,
        m2=kernel.m2 / lam**2,
        quad_resolution=kernel.quad_resolution,
    )


def sample_on_grid(kernel: KernelSpec, h: float) -> DiscreteStencil:
    """Sample the kernel on lattice offsets i*h and renormalize to unit discrete mass."""
    if h <= 0:
        raise ValueError(f"spacing must be positive, got h={h}")
    if h > kernel.d / 4:
        raise ResolutionError(
            f"h={h} too coarse for support radius d={kernel.d}; need h <= d/4")
    r = int(np.ceil(kernel.d / h - 1e-12))
    z = h * np.arange(-r, r + 1)
    if kernel.N == 1:
        vals = kernel.evaluate(z)
    else:
        zx, zy = np.meshgrid(z, z, indexing="ij")
        vals = kernel.evaluate(np.stack([zx, zy], axis=-1))
    total = float(np.sum(vals) * h**kernel.N)
    if total <= 0:
        raise ResolutionError("stencil has no interior samples")
    return DiscreteStencil(values=vals / total, h=float(h), radius=r, N=kernel.N)
