"""Reference objects of the local limit: flat solution, heat kernel,
self-similar profiles by shooting, and the regular part of the linear
fundamental solution.

The radial profile F of a self-similar solution t^(-1/(p-1)) F(|x| t^(-1/2))
of U_t = alpha Delta U - U^p satisfies

    alpha F'' + alpha (N-1) F'/xi + (xi/2) F' + F/(p-1) - F^p = 0,

with F'(0) = 0.  The derivation is re-verified numerically by a finite
difference residual test on the evaluated solution (see eval_profile).
Shooting classifies each launch value a0 = F(0) by the tail trichotomy
(hits zero / algebraic tail / fast decay); the constant solution
F == C_p = (p-1)^(-1/(p-1)) is the degenerate ray separating decaying
profiles from diverging ones and is excluded from brackets.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import AmbiguousTailError, BracketError, CoverageError
from .field import Field, Grid, ZeroTail
from .kernels import KernelSpec, sample_on_grid
from .nonlocal_op import ConvolutionPlan, convolve, make_plan

__all__ = [
    "flat_solution",
    "flat_decay_constant",
    "heat_kernel",
    "profile_rhs",
    "ProfileSolution",
    "integrate_profile",
    "shoot_vss",
    "shoot_UA",
    "eval_profile",
    "w_series",
    "check_w_bounds",
    "save_profile",
    "load_profile",
    "HITS_ZERO",
    "ALGEBRAIC",
    "FAST_DECAY",
    "UNRESOLVED",
    "DIVERGES",
]


def flat_solution(t: float, p: float) -> float:
    """The space-independent solution ((p-1) t)^(-1/(p-1)) of u' = -u^p."""
    if t <= 0:
        raise ValueError(f"flat solution needs t > 0, got {t}")
    return ((p - 1.0) * t) ** (-1.0 / (p - 1.0))


def flat_decay_constant(p: float) -> float:
    """C_p = (p-1)^(-1/(p-1)): flat_solution(t, p) = C_p t^(-1/(p-1))."""
    return (p - 1.0) ** (-1.0 / (p - 1.0))


def heat_kernel(x, t: float, alpha: float, N: int) -> np.ndarray:
    """(4 pi alpha t)^(-N/2) exp(-|x|^2 / (4 alpha t))."""
    if t <= 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    if alpha <= 0:
        raise ValueError(f"heat kernel needs alpha > 0, got {alpha}")
    x = np.asarray(x, dtype=float)
    if N > 1 and x.ndim and x.shape[-1] == N:
        r2 = np.sum(x * x, axis=-1)
    else:
        r2 = x * x
    return (4.0 * math.pi * alpha * t) ** (-N / 2.0) * np.exp(-r2 / (4.0 * alpha * t))


def profile_rhs(xi: float, F: float, Fp: float, p: float, N: int, alpha: float) -> float:
    """F'' away from the coordinate singularity at xi = 0."""
    return (np.abs(F) ** (p - 1.0) * F - F / (p - 1.0)
            - 0.5 * xi * Fp - alpha * (N - 1) * Fp / xi) / alpha


def _f2_at_zero(a0: float, p: float, N: int, alpha: float) -> float:
    """Series launch value F''(0) = (a0^p - a0/(p-1)) / (alpha N)."""
    return (a0 ** p - a0 / (p - 1.0)) / (alpha * N)


HITS_ZERO = "hits_zero"
ALGEBRAIC = "algebraic"
FAST_DECAY = "fast_decay"
UNRESOLVED = "unresolved"
DIVERGES = "diverges"


@dataclass
class TailClass:
    kind: str
    xi_cross: Optional[float] = None
    A_tail: Optional[float] = None


@dataclass
class ProfileSolution:
    """A radial self-similar profile with its tail classification."""

    p: float
    N: int
    alpha: float
    a0: float
    xi: np.ndarray
    F: np.ndarray
    tail: TailClass
    meta: dict = dc_field(default_factory=dict)
    _spline: Optional[CubicSpline] = dc_field(default=None, repr=False)

    def spline(self) -> CubicSpline:
        if self._spline is None:
            # even profile: clamp F'(0) = 0
            self._spline = CubicSpline(self.xi, self.F,
                                       bc_type=((1, 0.0), "not-a-knot"))
        return self._spline

    def profile_value(self, xi) -> np.ndarray:
        """F(xi) with the classified tail formula beyond the stored grid."""
        xi = np.asarray(xi, dtype=float)
        out = np.empty_like(xi)
        xi_end = self.xi[-1]
        inside = xi <= xi_end
        out[inside] = self.spline()(xi[inside])
        far = ~inside
        if np.any(far):
            if self.tail.kind == ALGEBRAIC and self.tail.A_tail:
                q = 2.0 / (self.p - 1.0)
                out[far] = self.tail.A_tail * xi[far] ** (-q)
            elif self.tail.kind == UNRESOLVED:
                # extend by the critical power law anchored at the last sample
                q = 2.0 / (self.p - 1.0)
                out[far] = self.F[-1] * (xi_end / xi[far]) ** q
            else:
                out[far] = 0.0
        return out


def _classify_from_samples(a0: float, p: float, xi: np.ndarray, F: np.ndarray,
                           xi_max: float, crossed_at: Optional[float],
                           floor_hit: bool, floor: float,
                           fast_threshold: float) -> TailClass:
    q = 2.0 / (p - 1.0)
    if crossed_at is not None:
        return TailClass(kind=HITS_ZERO, xi_cross=float(crossed_at))
    if floor_hit:
        # F passed below floor*a0 at xi_f, so any algebraic component has
        # constant at most ~ floor * a0 * xi_f^q; certify fast decay when
        # that bound beats the threshold
        xi_f = float(xi[-1])
        if floor * xi_f ** q <= fast_threshold:
            return TailClass(kind=FAST_DECAY)
        return TailClass(kind=UNRESOLVED)
    window = xi >= xi_max / 10.0
    if not np.any(window):
        return TailClass(kind=UNRESOLVED)
    g = xi[window] ** q * F[window]
    g_end = float(g[-1])
    if abs(g_end) < fast_threshold * a0:
        return TailClass(kind=FAST_DECAY)
    # the product approaches its limit like A + B/xi^2; detrend before
    # testing the plateau so the window can stay affordable
    w = xi[window] ** (-2.0)
    slope, a_fit = np.polyfit(w, g, 1)
    resid = g - (a_fit + slope * w)
    if a_fit > 0 and float(np.max(resid) - np.min(resid)) <= 0.01 * a_fit:
        return TailClass(kind=ALGEBRAIC, A_tail=float(a_fit))
    return TailClass(kind=UNRESOLVED)


def integrate_profile(a0: float, p: float, N: int, alpha: float,
                      xi_max: float = 40.0, rtol: float = 1e-10,
                      atol: float = 1e-12, dxi: float = 0.002,
                      coarse: bool = False, fast_threshold: float = 1e-6,
                      floor: float = 0.0) -> ProfileSolution:
    """Integrate from the series start at xi=0 and classify the tail.

    ``coarse`` skips the dense output grid (classification only), which is
    what the shooting loops use.  A positive ``floor`` stops the integration
    once F drops below floor*a0, for profiles expected to decay fast.
    """
    if a0 <= 0:
        raise ValueError(f"launch value must be positive, got a0={a0}")
    xi0 = 1e-4
    f2 = _f2_at_zero(a0, p, N, alpha)
    y0 = [a0 + 0.5 * f2 * xi0 * xi0, f2 * xi0]

    def rhs(xi, y):
        return [y[1], profile_rhs(xi, y[0], y[1], p, N, alpha)]

    def cross(xi, y):
        return y[0]
    cross.terminal = True
    cross.direction = -1.0

    cap = 10.0 * max(a0, flat_decay_constant(p))

    def blowup(xi, y):
        return y[0] - cap
    blowup.terminal = True
    blowup.direction = 1.0

    events = [cross, blowup]
    if floor > 0:
        def hit_floor(xi, y):
            return y[0] - floor * a0
        hit_floor.terminal = True
        hit_floor.direction = -1.0
        events.append(hit_floor)

    # sample at exact multiples of the grid step (the first multiple already
    # exceeds the series-launch point xi0)
    step = xi_max / 512.0 if coarse else dxi
    t_eval = np.arange(step, xi_max + step / 2, step)
    sol = solve_ivp(rhs, (xi0, xi_max), y0, method="RK45", rtol=rtol, atol=atol,
                    events=events, t_eval=t_eval, dense_output=False)
    crossed_at = sol.t_events[0][0] if sol.t_events[0].size else None
    diverged = sol.t_events[1].size > 0
    floor_hit = floor > 0 and sol.t_events[2].size > 0

    xi = np.concatenate([[0.0], sol.t])
    F = np.concatenate([[a0], sol.y[0]])
    if crossed_at is not None:
        xi = np.append(xi, crossed_at)
        F = np.append(F, 0.0)

    if diverged:
        tail = TailClass(kind=DIVERGES)
    else:
        tail = _classify_from_samples(a0, p, xi, F, xi_max, crossed_at,
                                      floor_hit, floor, fast_threshold)
    meta = {"rtol": rtol, "atol": atol, "xi_max": xi_max, "dxi": step}
    return ProfileSolution(p=p, N=N, alpha=alpha, a0=a0, xi=xi, F=F,
                           tail=tail, meta=meta)


def _crosses(a0: float, p: float, N: int, alpha: float, **kw) -> bool:
    prof = integrate_profile(a0, p, N, alpha, coarse=True, **kw)
    if prof.tail.kind == DIVERGES:
        raise BracketError(
            f"a0={a0} diverges (above the constant ray C_p); shrink the bracket")
    return prof.tail.kind == HITS_ZERO


def shoot_vss(p: float, N: int, alpha: float,
              bracket_lo: Optional[float] = None, bracket_hi: Optional[float] = None,
              bisect_tol: float = 1e-10, xi_max: float = 40.0,
              rtol: float = 1e-10, atol: float = 1e-12, dxi: float = 0.002,
              cache_dir: Optional[str] = None) -> ProfileSolution:
    """Bisect the launch value to the fast-decay separatrix (the VSS profile).

    A valid bracket has one endpoint whose profile crosses zero and one whose
    profile stays positive; the bisection itself only consumes that binary,
    so it is agnostic about which side is which.
    """
    c_p = flat_decay_constant(p)
    lo = bracket_lo if bracket_lo is not None else 0.1 * c_p
    hi = bracket_hi if bracket_hi is not None else 0.95 * c_p
    if not 0 < lo < hi < c_p:
        raise BracketError(f"bracket ({lo}, {hi}) must sit inside (0, C_p={c_p:.6g})")

    if cache_dir is not None:
        path = _cache_path(cache_dir, p, N, alpha, bisect_tol, rtol, atol, xi_max)
        if os.path.exists(path):
            return load_profile(path)

    kw = dict(xi_max=xi_max, rtol=rtol, atol=atol)
    lo_crosses = _crosses(lo, p, N, alpha, **kw)
    hi_crosses = _crosses(hi, p, N, alpha, **kw)
    if lo_crosses == hi_crosses:
        raise BracketError(
            f"invalid bracket: both endpoints {'cross zero' if lo_crosses else 'stay positive'} "
            f"(lo={lo}, hi={hi})")
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if _crosses(mid, p, N, alpha, **kw) == lo_crosses:
            lo = mid
        else:
            hi = mid
    a_star = 0.5 * (lo + hi)

    prof = integrate_profile(a_star, p, N, alpha, xi_max=xi_max, rtol=rtol,
                             atol=atol, dxi=dxi, floor=1e-12)
    if prof.tail.kind != FAST_DECAY:
        positive_end = hi if lo_crosses else lo
        alt = integrate_profile(positive_end, p, N, alpha, xi_max=xi_max,
                                rtol=rtol, atol=atol, dxi=dxi, floor=1e-12)
        if alt.tail.kind == FAST_DECAY:
            prof = alt
    prof.meta.update({"bracket_lo": lo, "bracket_hi": hi, "bisect_tol": bisect_tol,
                      "kind": "vss"})
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        save_profile(prof, path)
    return prof


def _tail_constant(a0: float, p: float, N: int, alpha: float, **kw) -> Optional[float]:
    prof = integrate_profile(a0, p, N, alpha, coarse=True, **kw)
    if prof.tail.kind == ALGEBRAIC:
        return prof.tail.A_tail
    if prof.tail.kind in (FAST_DECAY,):
        return 0.0
    return None


def shoot_UA(A: float, p: float, N: int, alpha: float,
             xi_max: float = 40.0, rtol: float = 1e-10, atol: float = 1e-12,
             dxi: float = 0.002, a_star: Optional[float] = None,
             target_rtol: float = 1e-3) -> ProfileSolution:
    """Find the profile whose algebraic tail constant equals A.

    The launch-to-tail map is only assumed monotone after an empirical probe
    ladder confirms it; a violated ladder raises with the probe table rather
    than guessing.
    """
    if A <= 0:
        raise ValueError(f"tail constant must be positive, got A={A}")
    c_p = flat_decay_constant(p)
    kw = dict(xi_max=xi_max, rtol=rtol, atol=atol)
    if a_star is None:
        a_star = shoot_vss(p, N, alpha, bisect_tol=1e-6, xi_max=xi_max,
                           rtol=rtol, atol=atol, dxi=xi_max / 512).a0

    fractions = [0.05, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.9, 0.95, 0.98]
    probes = []
    for s in fractions:
        a = a_star + s * (c_p - a_star)
        a_tail = _tail_constant(a, p, N, alpha, **kw)
        if a_tail is not None and a_tail > 0:
            probes.append((a, a_tail))
    if len(probes) < 3:
        raise AmbiguousTailError("too few usable probes for the tail-constant map",
                                 probes=probes)
    tails = [t for _, t in probes]
    if not all(t2 > t1 for t1, t2 in zip(tails, tails[1:])):
        raise AmbiguousTailError(
            "tail constant is not monotone along the probe ladder", probes=probes)

    lo_a, lo_t = probes[0]
    hi_a, hi_t = probes[-1]
    # extend the ladder toward the ends until the target is bracketed
    shrink = 0.5
    while A < lo_t:
        lo_a = a_star + (lo_a - a_star) * shrink
        if lo_a - a_star < 1e-12 * c_p:
            raise BracketError(f"target A={A} below the reachable tail range")
        t = _tail_constant(lo_a, p, N, alpha, **kw)
        if t is None or t <= 0:
            raise BracketError(f"target A={A} below the resolvable tail range")
        lo_t = t
    while A > hi_t:
        hi_a = c_p - (c_p - hi_a) * shrink
        if c_p - hi_a < 1e-12 * c_p:
            raise BracketError(f"target A={A} above the reachable tail range")
        t = _tail_constant(hi_a, p, N, alpha, **kw)
        if t is None:
            raise BracketError(f"tail unresolved near the constant ray (a0={hi_a})")
        hi_t = t

    # bisection on log(A_tail/A); the map is monotone on the bracket
    for _ in range(200):
        mid = 0.5 * (lo_a + hi_a)
        t = _tail_constant(mid, p, N, alpha, **kw)
        if t is None:
            raise AmbiguousTailError(f"unresolved tail at a0={mid}", probes=probes)
        if abs(math.log(t / A)) < 0.3 * target_rtol or hi_a - lo_a < 1e-14:
            break
        if t < A:
            lo_a = mid
        else:
            hi_a = mid
    else:
        raise AmbiguousTailError("tail root-finding did not converge", probes=probes)

    prof = integrate_profile(mid, p, N, alpha, xi_max=xi_max, rtol=rtol,
                             atol=atol, dxi=dxi)
    prof.meta.update({"kind": "ua", "A_target": A, "a_star": a_star})
    return prof


def eval_profile(profile: ProfileSolution, x, t: float) -> np.ndarray:
    """t^(-1/(p-1)) F(|x| t^(-1/2)); cubic interpolation on the stored grid."""
    if t <= 0:
        raise ValueError(f"self-similar evaluation needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    if profile.N > 1 and x.ndim and x.shape[-1] == profile.N:
        r = np.sqrt(np.sum(x * x, axis=-1))
    else:
        r = np.abs(x)
    xi = r / math.sqrt(t)
    return t ** (-1.0 / (profile.p - 1.0)) * profile.profile_value(xi)


# ---------------------------------------------------------------------------
# regular part of the fundamental solution of the linear equation


def poisson_terms(t: float, tol: float = 1e-12) -> int:
    """Smallest K with sum_{k>K} e^{-t} t^k / k! < tol."""
    if t <= 0:
        return 0
    k, term = 0, math.exp(-t)
    cum = term
    while 1.0 - cum >= tol:
        k += 1
        term *= t / k
        cum += term
        if k > 10000:
            raise RuntimeError("Poisson tail did not converge")
    return k


def w_series(kernel: KernelSpec, t: float, grid: Grid,
             K_terms: Optional[int] = None, engine: str = "fast") -> Field:
    """W(., t) = e^{-t} sum_{k>=1} (t^k / k!) J^{*k}, by iterated stencil convolution."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if K_terms is None:
        K_terms = poisson_terms(t)
    if K_terms * kernel.d > grid.L:
        raise CoverageError(
            f"box L={grid.L} cannot contain the support of J^*{K_terms} "
            f"(radius {K_terms * kernel.d})")
    values = np.zeros(grid.shape)
    if t == 0 or K_terms == 0:
        return Field(grid, values, t=t, tail=ZeroTail())

    plan = make_plan(kernel, grid, engine=engine)
    # J itself sampled at the (cell-centered) nodes, renormalized to unit mass
    r = grid.radii()
    f_k = kernel.evaluate_radial(r)
    f_k = f_k / (np.sum(f_k) * grid.cell_volume)
    weight = math.exp(-t) * t  # e^{-t} t^1 / 1!
    values += weight * f_k
    for k in range(2, K_terms + 1):
        f_k = convolve(plan, Field(grid, f_k, tail=ZeroTail())).values
        weight *= t / k
        values += weight * f_k
    return Field(grid, values, t=t, tail=ZeroTail())


@dataclass
class WBoundsReport:
    t_list: list
    h: float
    c1: float
    c2: float
    c3: float
    c1_fine: float
    c2_fine: float
    c3_fine: float
    passed: bool

    def ratios(self) -> tuple[float, float, float]:
        def ratio(a, b):
            return max(a / b, b / a)
        return (ratio(self.c1, self.c1_fine), ratio(self.c2, self.c2_fine),
                ratio(self.c3, self.c3_fine))


def _w_constants(kernel: KernelSpec, t_list, grid: Grid) -> tuple[float, float, float]:
    c1 = c2 = c3 = 0.0
    r = grid.radii()
    outside = r >= kernel.d
    for t in t_list:
        w = w_series(kernel, t, grid).values
        c1 = max(c1, float(np.max(w)) / t)
        c2 = max(c2, float(np.max(w[outside] * r[outside] ** (grid.N + 2))) / t)
        c3 = max(c3, float(np.max(w)) * t ** (grid.N / 2.0))
    return c1, c2, c3


def check_w_bounds(kernel: KernelSpec, t_list, grid: Grid) -> WBoundsReport:
    """Measure the three bound constants W/t, W |x|^(N+2)/t, W t^(N/2) and
    check they are stable (within 2x) under one grid refinement."""
    t_list = list(t_list)
    if not all(0 < t <= 10 for t in t_list):
        raise ValueError("t_list must lie in (0, 10]")
    c1, c2, c3 = _w_constants(kernel, t_list, grid)
    fine = Grid(N=grid.N, L=grid.L, h=grid.h / 2, mode=grid.mode)
    f1, f2, f3 = _w_constants(kernel, t_list, fine)
    report = WBoundsReport(t_list=t_list, h=grid.h, c1=c1, c2=c2, c3=c3,
                           c1_fine=f1, c2_fine=f2, c3_fine=f3, passed=False)
    report.passed = all(math.isfinite(c) and c > 0 for c in (c1, c2, c3, f1, f2, f3)) \
        and all(rho <= 2.0 for rho in report.ratios())
    return report


# ---------------------------------------------------------------------------
# profile persistence


def _cache_path(cache_dir: str, p, N, alpha, bisect_tol, rtol, atol, xi_max) -> str:
    name = (f"vss_p{p:.10g}_N{N}_alpha{alpha:.10g}_b{bisect_tol:.3g}"
            f"_r{rtol:.3g}_a{atol:.3g}_x{xi_max:.10g}.csv")
    return os.path.join(cache_dir, name)


def save_profile(profile: ProfileSolution, path: str):
    """Plain-text header (# key=value) plus a xi,F body."""
    lines = [f"# p={profile.p!r}", f"# N={profile.N!r}", f"# alpha={profile.alpha!r}",
             f"# a0={profile.a0!r}", f"# tail={profile.tail.kind}"]
    if profile.tail.A_tail is not None:
        lines.append(f"# A_tail={profile.tail.A_tail!r}")
    if profile.tail.xi_cross is not None:
        lines.append(f"# xi_cross={profile.tail.xi_cross!r}")
    for key in ("rtol", "atol", "xi_max", "dxi", "kind", "bisect_tol"):
        if key in profile.meta:
            val = profile.meta[key]
            lines.append(f"# {key}={val if isinstance(val, str) else repr(val)}")
    lines.append("xi,F")
    for xi, f in zip(profile.xi, profile.F):
        lines.append(f"{float(xi)!r},{float(f)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_profile(path: str) -> ProfileSolution:
    meta: dict = {}
    xi, F = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif line != "xi,F":
                a, b = line.split(",")
                xi.append(float(a))
                F.append(float(b))
    tail = TailClass(kind=meta.get("tail", UNRESOLVED))
    if "A_tail" in meta:
        tail.A_tail = float(meta["A_tail"])
    if "xi_cross" in meta:
        tail.xi_cross = float(meta["xi_cross"])
    prof_meta = {k: meta[k] for k in meta
                 if k not in ("p", "N", "alpha", "a0", "tail", "A_tail", "xi_cross")}
    return ProfileSolution(
        p=float(meta["p"]), N=int(meta["N"]), alpha=float(meta["alpha"]),
        a0=float(meta["a0"]), xi=np.asarray(xi), F=np.asarray(F), tail=tail,
        meta=prof_meta)
