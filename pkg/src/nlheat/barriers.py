"""Stationary and time barriers with constructive constants.

The space barrier is phi(x) = (C1 + C2 |x|^2)^(-1/(p-1)).  The largest
admissible C2 is exposed as a formula instead of a "small enough" constant,
so the barrier inequality L phi <= phi^p on |x| >= 2d can be checked
discretely, node by node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError
from .field import Field, Grid, PowerTail
from .kernels import KernelSpec
from .limits import flat_decay_constant
from .nonlocal_op import apply_L, make_plan
from .evolve import Trajectory

__all__ = [
    "BarrierPhi",
    "TimeBarrier",
    "DatumBound",
    "admissible_C2",
    "verify_supersolution",
    "choose_constants",
    "measure_datum_bound",
    "time_barrier_check",
]


@dataclass(frozen=True)
class BarrierPhi:
    C1: float
    C2: float
    p: float

    def __post_init__(self):
        if self.C1 <= 0 or self.C2 <= 0:
            raise ConfigError("barrier constants must be positive")

    def evaluate_radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (self.C1 + self.C2 * r * r) ** (-1.0 / (self.p - 1.0))

    def evaluate(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        if coords.ndim and coords.shape[-1] in (1, 2) and coords.ndim > 1:
            r = np.sqrt(np.sum(coords * coords, axis=-1))
        else:
            r = np.abs(coords)
        return self.evaluate_radial(r)


@dataclass(frozen=True)
class TimeBarrier:
    """g(t) = C_p (t + t0)^(-1/(p-1)), an exact solution of g' = -g^p."""

    p: float
    t0: float = 0.0

    @property
    def C_p(self) -> float:
        return flat_decay_constant(self.p)

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.C_p * (t + self.t0) ** (-1.0 / (self.p - 1.0))


def admissible_C2(kernel: KernelSpec, p: float) -> float:
    """Largest C2 for which the barrier chain closes:
    (p-1)^2 / (2 p 4^(p/(p-1)) m2)."""
    if not 1.0 < p < 1.0 + 2.0 / kernel.N:
        raise ConfigError(f"p={p} outside (1, {1 + 2 / kernel.N}) for N={kernel.N}")
    return (p - 1.0) ** 2 / (2.0 * p * 4.0 ** (p / (p - 1.0)) * kernel.m2)


@dataclass
class BarrierReport:
    radii: np.ndarray
    L_phi: np.ndarray
    phi_p: np.ndarray
    margin: np.ndarray
    max_margin: float
    tolerance: float
    passed: bool


def verify_supersolution(kernel: KernelSpec, C1: float, C2: float, p: float,
                         grid: Grid, engine: str = "fast") -> BarrierReport:
    """Check L phi <= phi^p at nodes with |x| >= 2d, away from the box edge.

    The convolution pad is filled with the closed-form phi, so the grid only
    discretizes the integral, never the barrier itself.
    """
    phi = BarrierPhi(C1=C1, C2=C2, p=p)
    plan = make_plan(kernel, grid, engine=engine)
    r = grid.radii()
    f = Field(grid, phi.evaluate_radial(r))

    def fill(coords):
        return phi.evaluate(coords)

    l_phi = apply_L(plan, f, fill=fill).values
    phi_p = phi.evaluate_radial(r) ** p

    x = grid.axis()
    edge = grid.L - np.abs(x)
    if grid.N == 1:
        edge_dist = edge
    else:
        ex, ey = np.meshgrid(edge, edge, indexing="ij")
        edge_dist = np.minimum(ex, ey)
    mask = (r >= 2.0 * kernel.d) & (edge_dist > kernel.d)
    if not np.any(mask):
        raise ConfigError("no test nodes: box too small for |x| >= 2d plus a pad margin")

    margin = l_phi[mask] - phi_p[mask]
    # stencil sampling error bound; the midpoint rule on the smooth compactly
    # supported integrand is far more accurate than this in practice
    quad_tol = float(np.max(phi_p[mask])) * (grid.h / kernel.d) ** 2
    tol = 1e-12 + quad_tol
    max_margin = float(np.max(margin))
    order = np.argsort(r[mask], kind="stable")
    return BarrierReport(
        radii=r[mask][order], L_phi=l_phi[mask][order], phi_p=phi_p[mask][order],
        margin=margin[order], max_margin=max_margin, tolerance=tol,
        passed=bool(max_margin <= tol))


@dataclass(frozen=True)
class DatumBound:
    """What the barrier construction needs to know about u0."""

    sup: float
    A: float
    B: float


def measure_datum_bound(f: Field, p: float, d: float) -> DatumBound:
    """Measure (sup u0, tail A, onset radius B) from a sampled datum.

    B is the smallest node radius > max(1, 2d) beyond which
    |x|^(2/(p-1)) u0 <= A + 1 holds on every farther node; data violating
    the critical-tail condition admit no such radius and are rejected.
    """
    sup = float(np.max(f.values))
    a = f.tail.A_eff if isinstance(f.tail, PowerTail) else 0.0
    q = 2.0 / (p - 1.0)
    r = f.grid.radii().ravel()
    w = (r ** q) * f.values.ravel()
    b_min = max(1.0, 2.0 * d)
    order = np.argsort(r)
    r_sorted, w_sorted = r[order], w[order]
    ok = w_sorted <= a + 1.0
    # suffix scan: smallest radius after which the bound holds everywhere
    holds_after = np.logical_and.accumulate(ok[::-1])[::-1]
    candidates = np.nonzero(holds_after & (r_sorted > b_min))[0]
    if candidates.size == 0:
        raise ConfigError(
            "datum violates the critical-tail condition: no radius B with "
            "|x|^(2/(p-1)) u0 <= A+1 beyond it")
    return DatumBound(sup=sup, A=a, B=float(r_sorted[candidates[0]]))


def choose_constants(kernel: KernelSpec, p: float,
                     datum: Union[Field, DatumBound]) -> BarrierPhi:
    """Constants C1 <= C2 <= C2_max with phi >= u0 everywhere.

    The two feasibility constraints are (2 C2)^(-1/(p-1)) >= A+1 (tail
    domination beyond B) and (C1 + C2 B^2)^(-1/(p-1)) >= sup u0 (interior
    domination); both are re-checked by direct evaluation before returning.
    """
    if isinstance(datum, Field):
        bound = measure_datum_bound(datum, p, kernel.d)
        f = datum
    else:
        bound, f = datum, None
    c2 = admissible_C2(kernel, p)
    c2 = min(c2, 0.5 * (bound.A + 1.0) ** (-(p - 1.0)))
    if bound.sup > 0:
        c2 = min(c2, bound.sup ** (-(p - 1.0)) / (1.0 + bound.B ** 2))
    phi = BarrierPhi(C1=c2, C2=c2, p=p)
    # constraint replay
    if (2.0 * phi.C2) ** (-1.0 / (p - 1.0)) < bound.A + 1.0 - 1e-12:
        raise ConfigError("tail-domination constraint infeasible")
    if bound.sup > 0 and (phi.C1 + phi.C2 * bound.B ** 2) ** (-1.0 / (p - 1.0)) \
            < bound.sup * (1.0 - 1e-12):
        raise ConfigError("interior-domination constraint infeasible")
    if f is not None:
        gap = phi.evaluate_radial(f.grid.radii()) - f.values
        if float(np.min(gap)) < -1e-12 * max(1.0, bound.sup):
            raise ConfigError("constructed barrier does not dominate the datum on the grid")
    return phi


@dataclass
class TimeBarrierReport:
    times: np.ndarray
    scaled_sup: np.ndarray
    C_p: float
    max_ratio: float
    passed: bool


def time_barrier_check(traj: Trajectory, p: float, rtol: float = 1e-6) -> TimeBarrierReport:
    """Check t^(1/(p-1)) sup u(t) <= C_p (1 + rtol) over the checkpoints."""
    c_p = flat_decay_constant(p)
    pos = traj.times > 0
    scaled = traj.times[pos] ** (1.0 / (p - 1.0)) * traj.sup_norm[pos]
    max_ratio = float(np.max(scaled)) if scaled.size else 0.0
    return TimeBarrierReport(
        times=traj.times[pos], scaled_sup=scaled, C_p=c_p,
        max_ratio=max_ratio, passed=bool(max_ratio <= c_p * (1.0 + rtol)))
