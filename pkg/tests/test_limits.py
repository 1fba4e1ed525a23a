import math

import numpy as np
import pytest

import nlheat as nl
from nlheat.errors import BracketError, CoverageError
from nlheat.field import Field, Grid
from nlheat.limits import (ALGEBRAIC, DIVERGES, FAST_DECAY, HITS_ZERO,
                           eval_profile, flat_decay_constant, flat_solution,
                           heat_kernel, integrate_profile, load_profile,
                           poisson_terms, profile_rhs, save_profile, shoot_UA,
                           shoot_vss, w_series, check_w_bounds)
from nlheat.nonlocal_op import convolve, make_plan

P, N = 1.5, 1


def test_flat_solution_values():
    assert flat_solution(1.0, 2.0) == 1.0
    assert flat_solution(4.0, 1.5) == pytest.approx(0.25, rel=1e-14)
    with pytest.raises(ValueError):
        flat_solution(0.0, 2.0)


def test_flat_solution_solves_ode():
    # F' = -F^p at sampled times, via Richardson-extrapolated differences
    def deriv(f, t, h=0.2, levels=6):
        table = [(f(t + h / 2 ** k) - f(t - h / 2 ** k)) / (2 * h / 2 ** k)
                 for k in range(levels)]
        for m in range(1, levels):
            fac = 4.0 ** m
            table = [(fac * b - a) / (fac - 1.0) for a, b in zip(table, table[1:])]
        return table[0]

    for t in (1.0, 2.0, 5.0):
        lhs = deriv(lambda s: flat_solution(s, 1.5), t)
        assert abs(lhs + flat_solution(t, 1.5) ** 1.5) < 1e-12


def test_heat_kernel_normalization_and_peak(alpha1d):
    g = Grid(N=1, L=16.0, h=0.05)
    vals = heat_kernel(g.axis(), 1.0, alpha1d, 1)
    assert abs(np.sum(vals) * g.h - 1.0) < 1e-8
    assert heat_kernel(0.0, 1.0, alpha1d, 1) == pytest.approx(
        (4 * math.pi * alpha1d) ** -0.5, rel=1e-12)
    with pytest.raises(ValueError):
        heat_kernel(0.0, -1.0, alpha1d, 1)


def test_heat_kernel_solves_heat_equation(alpha1d):
    # residual of u_t = alpha u_xx with both sides in closed form
    a = alpha1d
    for (x, t) in ((0.3, 0.7), (1.5, 2.0)):
        u = heat_kernel(x, t, a, 1)
        u_t = u * (x * x / (4 * a * t * t) - 1.0 / (2 * t))
        u_xx = u * (x * x / (4 * a * a * t * t) - 1.0 / (2 * a * t))
        assert abs(u_t - a * u_xx) < 1e-12


def test_profile_rhs_constant_ray_and_zero(alpha1d):
    c_p = flat_decay_constant(P)
    assert profile_rhs(1.0, c_p, 0.0, P, N, alpha1d) == pytest.approx(0.0, abs=1e-14)
    assert profile_rhs(2.5, 0.0, 0.0, P, N, alpha1d) == 0.0


def test_series_start_consistent_with_rhs(alpha1d):
    a0 = 2.0
    f2 = (a0 ** P - a0 / (P - 1)) / (alpha1d * N)
    xi = 1e-4
    f_series = a0 + 0.5 * f2 * xi * xi
    fp_series = f2 * xi
    assert profile_rhs(xi, f_series, fp_series, P, N, alpha1d) == pytest.approx(
        f2, abs=1e-6)


def test_integrate_profile_constant_ray_flagged(alpha1d):
    c_p = flat_decay_constant(P)
    prof = integrate_profile(c_p, P, N, alpha1d, coarse=True)
    assert np.max(np.abs(prof.F - c_p)) < 1e-6


def test_small_launch_hits_zero(alpha1d):
    # profiles below the separatrix cross zero in finite xi; a positive
    # profile of the linearized equation would need mass to decrease
    prof = integrate_profile(1e-6 * flat_decay_constant(P), P, N, alpha1d,
                             coarse=True)
    assert prof.tail.kind == HITS_ZERO
    assert prof.tail.xi_cross < 1.0


def test_huge_launch_diverges(alpha1d):
    prof = integrate_profile(1e3, P, N, alpha1d, coarse=True)
    assert prof.tail.kind == DIVERGES


def test_between_separatrix_and_ray_algebraic(alpha1d, vss_profile):
    c_p = flat_decay_constant(P)
    a0 = 0.5 * (vss_profile.a0 + c_p * 0.9)
    prof = integrate_profile(a0, P, N, alpha1d, coarse=True)
    assert prof.tail.kind == ALGEBRAIC
    assert prof.tail.A_tail > 0


def test_shooting_ladder_is_ordered(alpha1d):
    # crossing outcomes fill an interval below the separatrix, positive
    # outcomes the interval above
    c_p = flat_decay_constant(P)
    ladder = np.array([0.05, 0.2, 0.4, 0.6, 0.75, 0.85, 0.92, 0.97]) * c_p
    crossed = [integrate_profile(a, P, N, alpha1d, coarse=True).tail.kind == HITS_ZERO
               for a in ladder]
    switch = crossed.index(False)
    assert all(crossed[:switch]) and not any(crossed[switch:])


def test_vss_two_brackets_agree(alpha1d, vss_profile):
    c_p = flat_decay_constant(P)
    other = shoot_vss(P, N, alpha1d, bracket_lo=0.3 * c_p, bracket_hi=0.9 * c_p,
                      bisect_tol=1e-10)
    assert abs(other.a0 - vss_profile.a0) < 1e-9
    assert vss_profile.a0 < c_p


def test_vss_classified_fast_decay(vss_profile):
    assert vss_profile.tail.kind == FAST_DECAY
    assert vss_profile.meta["bracket_hi"] - vss_profile.meta["bracket_lo"] <= 1e-10


def test_vss_robust_to_tighter_ode_tolerance(alpha1d, vss_profile):
    tight = shoot_vss(P, N, alpha1d, bisect_tol=1e-8, rtol=1e-11, atol=1e-13,
                      dxi=40.0 / 512)
    assert abs(tight.a0 - vss_profile.a0) < 1e-7


def test_invalid_bracket_rejected(alpha1d):
    with pytest.raises(BracketError):
        shoot_vss(P, N, alpha1d, bracket_lo=0.05, bracket_hi=0.1)
    with pytest.raises(BracketError):
        shoot_vss(P, N, alpha1d, bracket_lo=1.0, bracket_hi=5.0)


def test_eval_profile_center_and_scale_invariance(vss_profile):
    a0 = vss_profile.a0
    assert eval_profile(vss_profile, 0.0, 1.0) == pytest.approx(a0, rel=1e-14)
    assert eval_profile(vss_profile, 0.0, 4.0) == pytest.approx(a0 / 16.0, rel=1e-12)
    lam = 3.0
    x = np.linspace(0, 2, 41)
    lhs = lam ** 4 * eval_profile(vss_profile, lam * x, lam * lam * 1.0)
    rhs = eval_profile(vss_profile, x, 1.0)
    assert np.max(np.abs(lhs - rhs)) < 1e-10
    with pytest.raises(ValueError):
        eval_profile(vss_profile, 0.0, 0.0)


def test_eval_profile_pde_residual(vss_profile, alpha1d):
    # independent re-verification of the derived profile equation: finite
    # difference residual of U_t = alpha U_xx - U^p on knot-aligned nodes
    dxi = vss_profile.meta["dxi"]
    h = 5 * dxi
    dt = 1e-3
    x = np.arange(-120, 121) * h

    def u(xx, tt):
        return eval_profile(vss_profile, xx, tt)

    u0 = u(x, 1.0)
    lap = (-u(x - 2 * h, 1.0) + 16 * u(x - h, 1.0) - 30 * u0
           + 16 * u(x + h, 1.0) - u(x + 2 * h, 1.0)) / (12 * h * h)
    ut = (u(x, 1 - 2 * dt) - 8 * u(x, 1 - dt) + 8 * u(x, 1 + dt)
          - u(x, 1 + 2 * dt)) / (12 * dt)
    resid = ut - alpha1d * lap + np.abs(u0) ** (P - 1) * u0
    assert np.max(np.abs(resid)) <= 1e-5 * np.max(np.abs(u0))


def test_ua_tail_constant_recovered(ua_profile):
    assert ua_profile.tail.kind == ALGEBRAIC
    assert abs(ua_profile.tail.A_tail - 1.0) <= 0.01


def test_ua_small_targets_order(alpha1d, vss_profile):
    lo = shoot_UA(1e-4, P, N, alpha1d, a_star=vss_profile.a0)
    hi = shoot_UA(1e-2, P, N, alpha1d, a_star=vss_profile.a0)
    assert lo.a0 < hi.a0
    assert abs(lo.tail.A_tail - 1e-4) <= 0.01 * 1e-4


def test_ua_initial_trace(ua_profile):
    # t^(-1/(p-1)) F(|x| t^(-1/2)) -> A |x|^(-2/(p-1)) as t -> 0+
    x0 = 2.0
    target = 1.0 * x0 ** (-4.0)
    for t in (1e-2, 1e-3, 1e-4):
        val = eval_profile(ua_profile, x0, t)
        assert abs(val - target) <= 0.02 * target


def test_profile_save_load_roundtrip(tmp_path, vss_profile):
    path = str(tmp_path / "prof.csv")
    save_profile(vss_profile, path)
    loaded = load_profile(path)
    assert loaded.a0 == vss_profile.a0
    assert loaded.tail.kind == vss_profile.tail.kind
    x = np.linspace(0, 2, 17)
    assert np.array_equal(eval_profile(loaded, x, 1.0),
                          eval_profile(vss_profile, x, 1.0))


def test_vss_cache_roundtrip(tmp_path, alpha1d):
    cache = str(tmp_path)
    first = shoot_vss(P, N, alpha1d, bisect_tol=1e-6, dxi=40.0 / 512,
                      cache_dir=cache)
    again = shoot_vss(P, N, alpha1d, bisect_tol=1e-6, dxi=40.0 / 512,
                      cache_dir=cache)
    assert again.a0 == first.a0
    assert again.tail.kind == first.tail.kind


def test_poisson_terms_bounds_tail():
    for t in (0.1, 1.0, 5.0):
        k = poisson_terms(t, 1e-12)
        # direct tail sum
        terms = [math.exp(-t)]
        for j in range(1, 200):
            terms.append(terms[-1] * t / j)
        assert 1.0 - sum(terms[:k + 1]) < 1e-12
        assert 1.0 - sum(terms[:k]) >= 1e-12


def test_w_series_zero_time(kernel1d):
    g = Grid(N=1, L=8.0, h=0.1)
    w = w_series(kernel1d, 0.0, g)
    assert np.all(w.values == 0.0)


def test_w_series_mass_identity(kernel1d):
    g = Grid(N=1, L=32.0, h=0.1)
    for t in (0.1, 1.0, 5.0):
        w = w_series(kernel1d, t, g)
        mass = np.sum(w.values) * g.h
        assert abs(mass - (1.0 - math.exp(-t))) < 1e-10
        assert w.values.min() >= -1e-12 * w.values.max()


def test_w_series_solves_linear_equation(kernel1d):
    # d/dt W = J*W - W + e^{-t} J, via centered differences at t = 1
    g = Grid(N=1, L=24.0, h=0.1)
    t, dt = 1.0, 1e-4
    wm = w_series(kernel1d, t - dt, g).values
    w0 = w_series(kernel1d, t, g)
    wp = w_series(kernel1d, t + dt, g).values
    jw = convolve(make_plan(kernel1d, g), w0).values
    j_grid = kernel1d.evaluate_radial(g.radii())
    j_grid = j_grid / (np.sum(j_grid) * g.h)
    resid = (wp - wm) / (2 * dt) - (jw - w0.values + math.exp(-t) * j_grid)
    assert np.max(np.abs(resid)) <= 1e-6


def test_w_series_first_term_dominates_smalltime(kernel1d):
    g = Grid(N=1, L=16.0, h=0.05)
    t = 0.05
    w = w_series(kernel1d, t, g)
    j_grid = kernel1d.evaluate_radial(g.radii())
    j_grid = j_grid / (np.sum(j_grid) * g.h)
    c1 = np.max(w.values) / t
    assert c1 >= math.exp(-t) * np.max(j_grid)


def test_w_series_box_guard(kernel1d):
    g = Grid(N=1, L=4.0, h=0.1)
    with pytest.raises(CoverageError):
        w_series(kernel1d, 5.0, g)


def test_check_w_bounds_stable(kernel1d):
    g = Grid(N=1, L=16.0, h=0.1)
    report = check_w_bounds(kernel1d, [0.1, 1.0], g)
    assert report.passed
    assert all(r <= 2.0 for r in report.ratios())
    with pytest.raises(ValueError):
        check_w_bounds(kernel1d, [11.0], g)
