"""Configuration-driven experiment runner.

Each subcommand emits CSV artifacts plus a manifest.json into the output
directory (--out, else the OUTPUT_DIR environment variable, else the
current directory).  Outputs are deterministic: same config, same build,
byte-identical files.
"""

from __future__ import annotations

import argparse
import glob
import math
import os
import sys

import numpy as np

from . import asymptotics, barriers, limits
from .config import (ExperimentConfig, datum_from, evolve_params_from,
                     grid_from, kernel_from, load_config)
from .errors import ConfigError
from .evolve import Trajectory, evolve_pair_compare, run
from .field import Field, Grid, PowerTail, ZeroTail, sample_datum
from .kernels import alpha, build_kernel
from .nonlocal_op import gaussian_test_field, local_limit_residual
from .reporting import read_csv, write_csv, write_manifest


def _outdir(args) -> str:
    out = args.out or os.environ.get("OUTPUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _traj_meta(cfg: ExperimentConfig, traj: Trajectory) -> dict:
    return {
        "p": traj.p, "dt": traj.dt, "scheme": traj.scheme, "q": traj.q,
        "grid.L": traj.grid.L, "grid.h": traj.grid.h, "grid.N": traj.grid.N,
        "domain.mode": traj.grid.mode, "kernel.d": cfg.get_float("kernel.d", 1.0),
    }


def _write_trajectory(outdir: str, cfg: ExperimentConfig, traj: Trajectory) -> list[str]:
    arts = [write_csv(
        os.path.join(outdir, "trajectory.csv"),
        [("t", traj.times), ("sup_norm", traj.sup_norm), ("l1_mass", traj.l1_mass),
         ("weighted_sup", traj.weighted_sup), ("absorbed_mass", traj.absorbed_mass),
         ("tail_A_eff", traj.tail_A_eff)],
        meta=_traj_meta(cfg, traj))]
    for t in sorted(traj.snapshots):
        snap = traj.snapshots[t]
        arts.append(_write_snapshot(outdir, cfg, traj, snap, t))
    return arts


def _write_snapshot(outdir: str, cfg: ExperimentConfig, traj: Trajectory,
                    snap: Field, t: float) -> str:
    meta = _traj_meta(cfg, traj)
    meta["t"] = t
    if isinstance(snap.tail, PowerTail):
        meta["tail_A_eff"] = snap.tail.A_eff
        meta["tail_q"] = snap.tail.q
    name = f"snapshot_t{t:.6g}.csv"
    if snap.grid.N == 1:
        cols = [("x", snap.grid.axis()), ("u", snap.values)]
    else:
        coords = snap.grid.coords().reshape(-1, 2)
        cols = [("x", coords[:, 0]), ("y", coords[:, 1]),
                ("u", snap.values.ravel())]
    return write_csv(os.path.join(outdir, name), cols, meta=meta)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, kind="simulate")
    outdir = _outdir(args)
    kernel = kernel_from(cfg)
    grid = grid_from(cfg)
    params = evolve_params_from(cfg)
    engine = cfg.get("conv.engine", "fast")
    traj = run(datum_from(cfg), kernel, grid, params, engine=engine,
               check_oracle=cfg.get_bool("conv.check_oracle", False))
    arts = _write_trajectory(outdir, cfg, traj)
    write_manifest(outdir, "simulate", cfg.raw, arts)
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config, kind="compare")
    outdir = _outdir(args)
    kernel = kernel_from(cfg)
    grid = grid_from(cfg)
    params = evolve_params_from(cfg)
    report = evolve_pair_compare(datum_from(cfg, "datum"), datum_from(cfg, "datum2"),
                                 kernel, grid, params,
                                 engine=cfg.get("conv.engine", "fast"))
    arts = [write_csv(
        os.path.join(outdir, "compare.csv"),
        [("t", report.times), ("min_gap", report.min_gaps)],
        meta={"p": params.p, "dt": params.dt, "min_gap": report.min_gap,
              "passed": report.passed})]
    write_manifest(outdir, "compare", cfg.raw, arts)
    if not report.passed:
        print(f"comparison failure: min gap {report.min_gap} < -{report.tolerance}",
              file=sys.stderr)
        return 1
    return 0


def cmd_profile(args) -> int:
    outdir = _outdir(args)
    if (args.A is None) == (not args.vss):
        raise ConfigError("profile needs exactly one of --A or --vss")
    if args.vss:
        prof = limits.shoot_vss(args.p, args.N, args.alpha,
                                cache_dir=args.cache_dir)
        name = "profile_vss.csv"
    else:
        prof = limits.shoot_UA(args.A, args.p, args.N, args.alpha)
        name = f"profile_ua_A{args.A:.6g}.csv"
    path = os.path.join(outdir, name)
    limits.save_profile(prof, path)
    config = {"p": str(args.p), "N": str(args.N), "alpha": repr(args.alpha),
              "mode": "vss" if args.vss else f"A={args.A!r}"}
    write_manifest(outdir, "profile", config, [path])
    return 0


def cmd_barrier(args) -> int:
    cfg = load_config(args.config, kind="barrier")
    outdir = _outdir(args)
    kernel = kernel_from(cfg)
    grid = grid_from(cfg)
    p = cfg.get_float("p")
    c2_max = barriers.admissible_C2(kernel, p)
    if cfg.get("barrier.C2") is not None:
        c2 = cfg.get_float("barrier.C2")
        c1 = cfg.get_float("barrier.C1", c2)
    elif cfg.get("datum.kind") is not None:
        datum = sample_datum(datum_from(cfg), grid)
        phi = barriers.choose_constants(kernel, p, datum)
        c1, c2 = phi.C1, phi.C2
    else:
        c2 = cfg.get_float("barrier.C2_scale", 0.5) * c2_max
        c1 = c2
    report = barriers.verify_supersolution(kernel, c1, c2, p, grid)
    n = len(report.radii)
    arts = [write_csv(
        os.path.join(outdir, "barrier.csv"),
        [("node", np.arange(n)), ("abs_x", report.radii), ("L_phi", report.L_phi),
         ("phi_p", report.phi_p), ("margin", report.margin)],
        meta={"p": p, "C1": c1, "C2": c2, "C2_max": c2_max,
              "max_margin": report.max_margin, "tolerance": report.tolerance,
              "passed": report.passed})]
    write_manifest(outdir, "barrier", cfg.raw, arts)
    return 0 if report.passed else 1


def cmd_wcheck(args) -> int:
    outdir = _outdir(args)
    t_list = [float(v) for v in args.t.split(",")]
    kernel = build_kernel("bump", d=args.d, N=args.N)
    grid = Grid(N=args.N, L=args.L, h=args.h)
    report = limits.check_w_bounds(kernel, t_list, grid)
    arts = [write_csv(
        os.path.join(outdir, "wcheck_constants.csv"),
        [("h", [report.h, report.h / 2]),
         ("c1", [report.c1, report.c1_fine]),
         ("c2", [report.c2, report.c2_fine]),
         ("c3", [report.c3, report.c3_fine])],
        meta={"t_list": args.t, "N": args.N, "kernel.d": args.d,
              "passed": report.passed})]
    cols_t, cols_x, cols_w = [], [], []
    for t in t_list:
        w = limits.w_series(kernel, t, grid)
        x = grid.axis() if args.N == 1 else grid.coords().reshape(-1, 2)[:, 0]
        cols_t.extend([t] * w.values.size)
        cols_x.extend(np.asarray(x).ravel())
        cols_w.extend(w.values.ravel())
    arts.append(write_csv(
        os.path.join(outdir, "wcheck_field.csv"),
        [("t", cols_t), ("x", cols_x), ("W", cols_w)],
        meta={"N": args.N, "kernel.d": args.d, "h": args.h}))
    config = {"t": args.t, "d": repr(args.d), "N": str(args.N),
              "L": repr(args.L), "h": repr(args.h)}
    write_manifest(outdir, "wcheck", config, arts)
    return 0 if report.passed else 1


def cmd_rates(args) -> int:
    outdir = _outdir(args)
    meta, cols = read_csv(args.traj)
    lo, hi = (float(v) for v in args.window.split(","))
    quantity = args.quantity
    if quantity not in cols:
        raise ConfigError(f"trajectory has no column {quantity!r}")
    fit = asymptotics.fit_power_law(cols["t"], cols[quantity], (lo, hi))
    arts = [write_csv(
        os.path.join(outdir, "rates.csv"),
        [("quantity", [quantity]), ("window", [f"{lo:g}..{hi:g}"]),
         ("exponent", [fit.exponent]), ("residual", [fit.residual_rms])],
        meta={"p": meta.get("p", ""), "traj": os.path.basename(args.traj)})]
    config = {"traj": os.path.basename(args.traj), "window": args.window,
              "quantity": quantity}
    write_manifest(outdir, "rates", config, arts)
    return 0


def _load_snapshot(path: str) -> Field:
    meta, cols = read_csv(path)
    grid = Grid(N=int(meta["grid.N"]), L=float(meta["grid.L"]),
                h=float(meta["grid.h"]), mode=meta["domain.mode"])
    values = cols["u"].reshape(grid.shape)
    tail = ZeroTail()
    if "tail_A_eff" in meta:
        tail = PowerTail(A_eff=float(meta["tail_A_eff"]), q=float(meta["tail_q"]))
    return Field(grid, values, t=float(meta["t"]), tail=tail)


def cmd_converge(args) -> int:
    outdir = _outdir(args)
    traj_meta, _ = read_csv(args.traj)
    p = float(traj_meta["p"])
    prof = limits.load_profile(args.profile)
    kind = prof.meta.get("kind", "vss")
    metric_name = "metric_vss" if kind == "vss" else "metric_UA"
    snaps = sorted(glob.glob(os.path.join(os.path.dirname(args.traj) or ".",
                                          "snapshot_t*.csv")))
    if not snaps:
        raise ConfigError(f"no snapshot_t*.csv next to {args.traj}")
    ts, metrics = [], []
    for path in snaps:
        snap = _load_snapshot(path)
        ts.append(snap.t)
        metrics.append(asymptotics.convergence_metric(snap, prof, args.K, p))
    order = np.argsort(ts)
    arts = [write_csv(
        os.path.join(outdir, "convergence.csv"),
        [("t", np.asarray(ts)[order]), (metric_name, np.asarray(metrics)[order]),
         ("K", [args.K] * len(ts)), ("p", [p] * len(ts))],
        meta={"profile": os.path.basename(args.profile), "p": p, "K": args.K})]
    config = {"traj": os.path.basename(args.traj),
              "profile": os.path.basename(args.profile), "K": repr(args.K)}
    write_manifest(outdir, "converge", config, arts)
    return 0


def cmd_oplimit(args) -> int:
    outdir = _outdir(args)
    lams = [float(v) for v in args.lambda_list.split(",")]
    kernel = build_kernel("bump", d=args.d, N=args.N)
    grid = Grid(N=args.N, L=args.L, h=args.h)
    g = gaussian_test_field(args.N)
    residuals = [local_limit_residual(kernel, lam, g, alpha(kernel), grid)
                 for lam in lams]
    orders = [""] + [repr(math.log(residuals[i] / residuals[i + 1])
                          / math.log(lams[i + 1] / lams[i]))
                     for i in range(len(lams) - 1)]
    arts = [write_csv(
        os.path.join(outdir, "oplimit.csv"),
        [("lambda", lams), ("residual", residuals), ("order_vs_prev", orders)],
        meta={"N": args.N, "kernel.d": args.d, "alpha": alpha(kernel),
              "L": args.L, "h": args.h})]
    config = {"lambda_list": args.lambda_list, "d": repr(args.d),
              "N": str(args.N), "L": repr(args.L), "h": repr(args.h)}
    write_manifest(outdir, "oplimit", config, arts)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlheat",
        description="nonlocal diffusion-absorption laboratory")
    parser.add_argument("--out", default=None,
                        help="output directory (default: $OUTPUT_DIR or .)")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a time integration from a config file")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="evolve an ordered pair and report min gaps")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("profile", help="shoot a self-similar profile")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--A", type=float, default=None,
                   help="tail constant for the critical-decay profile")
    s.add_argument("--vss", action="store_true", help="shoot the very singular profile")
    s.add_argument("--cache-dir", default=None)
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("barrier", help="verify the stationary barrier inequality")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_barrier)

    s = sub.add_parser("wcheck", help="bounds on the regular part of the fundamental solution")
    s.add_argument("--t", required=True, help="comma-separated times in (0, 10]")
    s.add_argument("--d", type=float, default=1.0)
    s.add_argument("--N", type=int, default=1)
    s.add_argument("--L", type=float, default=32.0)
    s.add_argument("--h", type=float, default=0.05)
    s.set_defaults(func=cmd_wcheck)

    s = sub.add_parser("rates", help="fit a power-law decay rate from a trajectory")
    s.add_argument("--traj", required=True)
    s.add_argument("--window", required=True, help="t_lo,t_hi")
    s.add_argument("--quantity", default="sup_norm")
    s.set_defaults(func=cmd_rates)

    s = sub.add_parser("converge", help="profile-convergence metric over snapshots")
    s.add_argument("--traj", required=True)
    s.add_argument("--profile", required=True)
    s.add_argument("--K", type=float, default=2.0)
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("oplimit", help="residual of the scaled operator against its local limit")
    s.add_argument("--lambda-list", required=True)
    s.add_argument("--d", type=float, default=1.0)
    s.add_argument("--N", type=int, default=1)
    s.add_argument("--L", type=float, default=3.0)
    s.add_argument("--h", type=float, default=1.0 / 256)
    s.set_defaults(func=cmd_oplimit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
