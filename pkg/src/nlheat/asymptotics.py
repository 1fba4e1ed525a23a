"""Rescaling, rate fitting, and convergence metrics toward the limit profiles.

The rescaling u_lam(x, t) = lam^(2/(p-1)) u(lam x, lam^2 t) preserves the
absorption structure; a single long run with snapshots at times lam^2 t_ref
supplies the whole family at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import CoverageError, SchedulingError
from .evolve import Trajectory
from .field import Field, Grid, PowerTail
from .limits import ProfileSolution, eval_profile

__all__ = [
    "RateFit",
    "rescale_field",
    "fit_power_law",
    "convergence_metric",
    "check_mass_divergence",
    "mass_divergence_budget",
    "gamma",
    "mass_balance_residual",
]


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    residual_rms: float
    window: tuple


def fit_power_law(times, values, window) -> RateFit:
    """Least squares of log(values) against log(times) on the window."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    mask = (times >= lo) & (times <= hi)
    if np.count_nonzero(mask) < 4:
        raise ValueError(f"need >= 4 samples in the window [{lo}, {hi}], "
                         f"got {np.count_nonzero(mask)}")
    if hi < 10.0 * lo:
        raise ValueError(f"window [{lo}, {hi}] spans less than one decade")
    t, v = times[mask], values[mask]
    if np.any(v <= 0):
        raise ValueError("power-law fit needs positive values on the window")
    lt, lv = np.log(t), np.log(v)
    slope, intercept = np.polyfit(lt, lv, 1)
    resid = lv - (slope * lt + intercept)
    return RateFit(exponent=float(slope), intercept=float(intercept),
                   residual_rms=float(np.sqrt(np.mean(resid ** 2))),
                   window=(float(lo), float(hi)))


def rescale_field(snapshot: Field, lam: float, p: float, t_ref: float,
                  target: Grid | None = None, time_rtol: float = 1e-6) -> Field:
    """u_lam(., t_ref) from a snapshot taken at lam^2 t_ref.

    Values lam^(2/(p-1)) u(lam x) are resampled by linear interpolation onto
    the target grid (default: the source grid shrunk by lam).  The power
    tail with exponent 2/(p-1) is invariant under this scaling, so A_eff
    carries over unchanged.
    """
    if lam < 1:
        raise ValueError(f"need lam >= 1, got {lam}")
    src = snapshot.grid
    if abs(snapshot.t - lam * lam * t_ref) > time_rtol * max(1.0, lam * lam * t_ref):
        raise SchedulingError(
            f"snapshot at t={snapshot.t} does not match lam^2 t_ref = {lam * lam * t_ref}")
    if target is None:
        n_t = int(math.floor(2.0 * src.L / (lam * src.h)))
        n_t -= n_t % 2
        target = Grid(N=src.N, L=n_t * src.h / 2.0, h=src.h, mode=src.mode)
    if target.L * lam > src.L * (1 + 1e-12):
        raise CoverageError(
            f"target box L={target.L} needs source coverage {target.L * lam} > {src.L}")

    scale = lam ** (2.0 / (p - 1.0))
    x_src = src.axis()
    if src.N == 1:
        values = scale * np.interp(target.axis() * lam, x_src, snapshot.values)
    else:
        interp = RegularGridInterpolator((x_src, x_src), snapshot.values,
                                         method="linear", bounds_error=True)
        values = scale * interp(target.coords().reshape(-1, 2)).reshape(target.shape)
    tail = snapshot.tail
    if isinstance(tail, PowerTail):
        tail = PowerTail(A_eff=tail.A_eff, q=tail.q)
    return Field(target, values, t=t_ref, tail=tail)


def convergence_metric(snapshot: Field, profile: ProfileSolution, K: float,
                       p: float) -> float:
    """t^(1/(p-1)) sup over |x| <= K sqrt(t) of |u - profile|."""
    t = snapshot.t
    if t <= 0:
        raise ValueError("snapshot must carry a positive time stamp")
    radius = K * math.sqrt(t)
    if radius > snapshot.grid.L:
        raise CoverageError(
            f"ball of radius K sqrt(t) = {radius} not contained in box L={snapshot.grid.L}")
    r = snapshot.grid.radii()
    mask = r <= radius
    ref = eval_profile(profile, r[mask], t)
    gap = float(np.max(np.abs(snapshot.values[mask] - ref)))
    return t ** (1.0 / (p - 1.0)) * gap


def check_mass_divergence(traj: Trajectory, lam_list, R: float, t_ref: float,
                          p: float) -> list[dict]:
    """Truncated rescaled masses over the ball of radius R, one row per lam."""
    rows = []
    for lam in lam_list:
        snap = traj.snapshot_at(lam * lam * t_ref)
        resc = rescale_field(snap, lam, p, t_ref)
        if R > resc.grid.L * (1 + 1e-12):
            raise CoverageError(f"R={R} exceeds the rescaled box L={resc.grid.L}")
        r = resc.grid.radii()
        mass = float(np.sum(resc.values[r <= R]) * resc.grid.cell_volume)
        rows.append({"lam": float(lam), "t_snapshot": float(snap.t),
                     "mass_in_ball": mass})
    return rows


def mass_divergence_budget(rows: list[dict], L_value: float, p: float, N: int,
                           t_ref: float) -> dict:
    """Fit the smallest C with L - C L^p t^gamma below every measured mass.

    Mirrors the lower-bound shape of the rescaled-mass estimate; reported as
    a diagnostic, not asserted.
    """
    g = gamma(p, N)
    deficits = [(L_value - row["mass_in_ball"]) / (L_value ** p * t_ref ** g)
                for row in rows]
    c = max(0.0, max(deficits))
    budget = L_value - c * L_value ** p * t_ref ** g
    return {"C": c, "gamma": g, "budget": budget,
            "satisfied": all(row["mass_in_ball"] >= budget - 1e-12 for row in rows)}


def gamma(p: float, N: int) -> float:
    """The exponent 1 - N(p-1)/2, positive in the absorption-dominated range."""
    if not 1.0 < p < 1.0 + 2.0 / N:
        raise ValueError(f"p={p} outside (1, {1 + 2 / N}) for N={N}")
    return 1.0 - 0.5 * N * (p - 1.0)


def mass_balance_residual(traj: Trajectory) -> float:
    """|m(T) - m(0) + absorbed(T)| / m(0), or the absolute residual if m(0) = 0."""
    m0 = traj.l1_mass[0]
    mT = traj.l1_mass[-1]
    aT = traj.absorbed_mass[-1]
    resid = abs(mT - m0 + aT)
    return resid / m0 if m0 > 0 else resid
