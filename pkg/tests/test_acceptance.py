"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The expensive runs are
session fixtures (see conftest) shared across criteria.
"""

import math
import time

import numpy as np
import pytest

import nlheat as nl
from nlheat.asymptotics import (check_mass_divergence, convergence_metric,
                                fit_power_law, mass_balance_residual)
from nlheat.barriers import (admissible_C2, choose_constants,
                             time_barrier_check, verify_supersolution)
from nlheat.field import Field, Grid
from nlheat.limits import check_w_bounds, flat_decay_constant, w_series
from nlheat.nonlocal_op import (convolve, gaussian_test_field,
                                local_limit_residual, make_plan)
from nlheat.reporting import write_csv

from conftest import ACC_P


def report(n, label, detail):
    print(f"ACCEPTANCE {n} ({label}): PASS [{detail}]")


def test_criterion_01_engine_oracle(rng, kernel1d, kernel2d):
    t0 = time.time()
    g1 = Grid(N=1, L=4.0, h=1.0 / 32)
    f1 = Field(g1, rng.uniform(0.0, 1.0, g1.shape))
    gap1 = np.max(np.abs(
        convolve(make_plan(kernel1d, g1, engine="fast"), f1).values
        - convolve(make_plan(kernel1d, g1, engine="direct"), f1).values))
    g2 = Grid(N=2, L=2.0, h=1.0 / 16)
    f2 = Field(g2, rng.uniform(0.0, 1.0, g2.shape))
    gap2 = np.max(np.abs(
        convolve(make_plan(kernel2d, g2, engine="fast"), f2).values
        - convolve(make_plan(kernel2d, g2, engine="direct"), f2).values))
    elapsed = time.time() - t0
    assert gap1 <= 1e-12 and gap2 <= 1e-12
    assert elapsed < 1.0
    report(1, "engine oracle", f"1d gap {gap1:.2e}, 2d gap {gap2:.2e}, {elapsed:.2f}s")


def test_criterion_02_exact_ode_reduction(kernel1d):
    grid = Grid(N=1, L=1.0, h=0.25, mode="periodic")
    params = nl.EvolveParams(p=2.0, dt=1e-3, t_end=9.0, checkpoint_first=1.0)
    traj = nl.run(nl.Constant(1.0), kernel1d, grid, params)
    etd_err = abs(traj.sup_norm[-1] - 0.1)
    assert etd_err <= 1e-4

    params_p = nl.EvolveParams(p=2.0, dt=1e-3, t_end=9.0, checkpoint_first=1.0,
                               scheme="picard")
    traj_p = nl.run(nl.Constant(1.0), kernel1d, grid, params_p)
    pic_errs = [abs(s - 1.0 / (1.0 + t))
                for t, s in zip(traj_p.times[1:], traj_p.sup_norm[1:])]
    assert max(pic_errs) <= 1e-6
    report(2, "exact ODE reduction",
           f"etd1 err {etd_err:.2e} <= 1e-4, picard err {max(pic_errs):.2e} <= 1e-6")


def test_criterion_03_mass_balance(kernel1d):
    grid = Grid(N=1, L=10.0, h=0.05, mode="periodic")
    resids = []
    for dt in (1e-3, 5e-4):
        params = nl.EvolveParams(p=ACC_P, dt=dt, t_end=4.0, checkpoint_first=0.5)
        traj = nl.run(nl.CompactBump(amplitude=1.0, radius=1.0), kernel1d,
                      grid, params)
        resids.append(mass_balance_residual(traj))
    assert resids[0] <= 1e-4
    ratio = resids[1] / resids[0]
    assert 0.5 * 0.7 <= ratio <= 0.5 * 1.3
    report(3, "mass balance",
           f"residual {resids[0]:.2e} <= 1e-4, halving ratio {ratio:.3f}")


def test_criterion_04_comparison_preservation(kernel1d):
    grid = Grid(N=1, L=12.0, h=0.05)
    params = nl.EvolveParams(p=ACC_P, dt=1e-3, t_end=10.0, checkpoint_first=0.5)
    rep = nl.evolve_pair_compare(nl.CompactBump(amplitude=1.0, radius=1.0),
                                 nl.CompactBump(amplitude=1.1, radius=1.0),
                                 kernel1d, grid, params)
    assert rep.min_gap >= -1e-10
    assert rep.passed
    report(4, "comparison preservation", f"min gap {rep.min_gap:.2e} >= -1e-10")


def test_criterion_05_time_decay(bump_run_long):
    traj = bump_run_long["traj"]
    fit = fit_power_law(traj.times, traj.sup_norm, (10.0, 100.0))
    assert abs(fit.exponent + 2.0) <= 0.15
    c_p = flat_decay_constant(ACC_P)
    assert c_p == 4.0
    tb = time_barrier_check(traj, ACC_P, rtol=1e-3)
    assert tb.passed
    report(5, "time decay",
           f"exponent {fit.exponent:.3f} in -2+-0.15, "
           f"max t^2 sup {tb.max_ratio:.3f} <= {c_p}*(1+1e-3)")


def test_criterion_06_space_barrier(kernel1d, bump_run_long):
    c2_half = admissible_C2(kernel1d, ACC_P) / 2.0
    rep = verify_supersolution(kernel1d, c2_half, c2_half, ACC_P,
                               bump_run_long["grid"])
    assert rep.passed

    datum_field = nl.sample_datum(bump_run_long["datum"], bump_run_long["grid"])
    phi = choose_constants(kernel1d, ACC_P, datum_field)
    worst = -np.inf
    for snap in bump_run_long["traj"].snapshots.values():
        gap = np.max(snap.values - phi.evaluate_radial(snap.grid.radii()))
        worst = max(worst, float(gap))
    assert worst <= 1e-10
    report(6, "space barrier",
           f"supersolution margin {rep.max_margin:.2e} <= {rep.tolerance:.2e}, "
           f"max (u - phi) over checkpoints {worst:.2e}")


def test_criterion_07_vss_profile(alpha1d, vss_profile):
    t0 = time.time()
    c_p = flat_decay_constant(ACC_P)
    other = nl.shoot_vss(ACC_P, 1, alpha1d, bracket_lo=0.3 * c_p,
                         bracket_hi=0.9 * c_p, bisect_tol=1e-10)
    agree = abs(other.a0 - vss_profile.a0)
    assert agree <= 1e-9

    dxi = vss_profile.meta["dxi"]
    h, dt = 5 * dxi, 1e-3
    x = np.arange(-120, 121) * h

    def u(xx, tt):
        return nl.eval_profile(vss_profile, xx, tt)

    u0 = u(x, 1.0)
    lap = (-u(x - 2 * h, 1.0) + 16 * u(x - h, 1.0) - 30 * u0
           + 16 * u(x + h, 1.0) - u(x + 2 * h, 1.0)) / (12 * h * h)
    ut = (u(x, 1 - 2 * dt) - 8 * u(x, 1 - dt) + 8 * u(x, 1 + dt)
          - u(x, 1 + 2 * dt)) / (12 * dt)
    resid = np.max(np.abs(ut - alpha1d * lap + np.abs(u0) ** (ACC_P - 1) * u0))
    rel = resid / np.max(np.abs(u0))
    assert rel <= 1e-5
    report(7, "VSS profile",
           f"a* = {vss_profile.a0:.9f}, brackets agree to {agree:.1e}, "
           f"PDE residual {rel:.2e} <= 1e-5, {time.time() - t0:.0f}s")


def test_criterion_08_convergence_to_vss(bump_run_long, vss_profile):
    traj = bump_run_long["traj"]
    details = []
    for K in (1.0, 2.0):
        ms = [convergence_metric(traj.snapshot_at(t), vss_profile, K, ACC_P)
              for t in (10.0, 20.0, 40.0, 80.0)]
        assert all(b < a for a, b in zip(ms, ms[1:]))
        assert ms[-1] <= 0.5 * ms[0]
        details.append(f"K={K:g}: {ms[0]:.3f}->{ms[-1]:.3f}")
    report(8, "convergence to the very singular profile", "; ".join(details))


def test_criterion_09_convergence_to_ua(powertail_run, ua_profile):
    ms = [convergence_metric(powertail_run.snapshot_at(t), ua_profile, 1.0, ACC_P)
          for t in (10.0, 20.0, 40.0, 80.0)]
    assert all(b < a for a, b in zip(ms, ms[1:]))
    report(9, "convergence to the critical-tail profile",
           f"metrics {', '.join(f'{m:.3f}' for m in ms)} decreasing")


def test_criterion_10_w_checks(kernel1d):
    grid = Grid(N=1, L=32.0, h=0.1)
    for t in (0.1, 1.0, 5.0):
        w = w_series(kernel1d, t, grid)
        assert abs(np.sum(w.values) * grid.h - (1 - math.exp(-t))) <= 1e-10

    t, dt = 1.0, 1e-4
    wm = w_series(kernel1d, t - dt, grid).values
    w0 = w_series(kernel1d, t, grid)
    wp = w_series(kernel1d, t + dt, grid).values
    jw = convolve(make_plan(kernel1d, grid), w0).values
    j_grid = kernel1d.evaluate_radial(grid.radii())
    j_grid = j_grid / (np.sum(j_grid) * grid.h)
    resid = np.max(np.abs((wp - wm) / (2 * dt)
                          - (jw - w0.values + math.exp(-t) * j_grid)))
    assert resid <= 1e-6

    rep = check_w_bounds(kernel1d, [0.1, 1.0, 5.0], grid)
    assert rep.passed
    ratios = rep.ratios()
    assert all(r <= 2.0 for r in ratios)
    report(10, "W checks",
           f"mass ids <= 1e-10, residual {resid:.2e} <= 1e-6, "
           f"constants ({rep.c1:.3f}, {rep.c2:.3f}, {rep.c3:.3f}) "
           f"drift <= {max(ratios):.3f}x")


def test_criterion_11_operator_limit(kernel1d, alpha1d):
    grid = Grid(N=1, L=3.0, h=1.0 / 256)
    gauss = gaussian_test_field(1)
    lams = (4.0, 8.0, 16.0)
    res = [local_limit_residual(kernel1d, lam, gauss, alpha1d, grid)
           for lam in lams]
    assert res[1] < res[0] and res[2] < res[1]
    orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    assert all(1.5 <= o <= 2.5 for o in orders)
    report(11, "operator limit",
           f"residuals {', '.join(f'{r:.2e}' for r in res)} decreasing; "
           f"orders {', '.join(f'{o:.2f}' for o in orders)} (reported)")


def test_criterion_12_rescaled_mass_growth(bump_run_long):
    rows = check_mass_divergence(bump_run_long["traj"], [1.0, 2.0, 4.0],
                                 R=5.0, t_ref=1.0, p=ACC_P)
    masses = [row["mass_in_ball"] for row in rows]
    for prev, cur in zip(masses, masses[1:]):
        assert cur >= prev * (1.0 - 0.01)
    report(12, "rescaled mass growth",
           f"masses {', '.join(f'{m:.4f}' for m in masses)} nondecreasing")


def test_criterion_13_secondary_note():
    pytest.skip("criterion 13 exercises the plots package; "
                "see plots/tests/test_acceptance.py")
