"""The four figure kinds: decay, overlay, barrier, wbounds.

Rendering is read-only over its inputs and deterministic: fixed figure
geometry, no timestamps, data drawn in input order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .tables import SchemaError, need_columns, need_meta, read_table

KINDS = ("decay", "overlay", "barrier", "wbounds")

FIGSIZE = (6.4, 4.2)
DPI = 130


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


@dataclass
class RenderResult:
    """Output path plus the plotted series, so callers can assert on them."""

    path: str
    series: dict = field(default_factory=dict)


def _save(fig, spec: FigureSpec) -> None:
    fig.savefig(spec.output, dpi=DPI, metadata={"Software": "nlheat-plots"})
    plt.close(fig)


def _render_decay(spec: FigureSpec) -> RenderResult:
    path = spec.inputs[0]
    meta, cols = read_table(path)
    need_columns(path, cols, ["t", "sup_norm"])
    need_meta(path, meta, ["p"])
    p = float(meta["p"])
    mask = cols["t"] > 0
    t, sup = cols["t"][mask], cols["sup_norm"][mask]
    c_p = (p - 1.0) ** (-1.0 / (p - 1.0))
    reference = c_p * t ** (-1.0 / (p - 1.0))

    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(t, sup, "o-", color="tab:blue", label="sup norm")
    ax.plot(t, reference, "--", color="tab:red",
            label=f"reference slope -1/(p-1) = {-1 / (p - 1):g}")
    if np.all(sup > 0):
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("sup norm")
    ax.set_title(f"decay, p = {p:g}")
    ax.legend()
    _save(fig, spec)
    return RenderResult(path=spec.output,
                        series={"t": t, "sup_norm": sup, "reference": reference})


def _profile_curve(meta: dict, cols: dict, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Self-similar evaluation of a (xi, F) table at time t, on the xi grid."""
    p = float(meta["p"])
    xi = cols["xi"]
    x = xi * np.sqrt(t)
    return x, t ** (-1.0 / (p - 1.0)) * cols["F"]


def _render_overlay(spec: FigureSpec) -> RenderResult:
    if len(spec.inputs) < 2:
        raise SchemaError("overlay needs two inputs (field-or-profile, profile)")
    tables = [(path,) + read_table(path) for path in spec.inputs]
    # a field snapshot pins the evaluation time for any profile curves
    t_eval = 1.0
    for path, meta, cols in tables:
        if "xi" not in cols:
            need_columns(path, cols, ["x", "u"])
            need_meta(path, meta, ["t"])
            t_eval = float(meta["t"])

    fig, ax = plt.subplots(figsize=FIGSIZE)
    curves = []
    for path, meta, cols in tables:
        if "xi" in cols:
            need_columns(path, cols, ["xi", "F"])
            need_meta(path, meta, ["p"])
            x, u = _profile_curve(meta, cols, t_eval)
            label = f"profile {meta.get('kind', '')}".strip()
        else:
            x, u = cols["x"], cols["u"]
            label = f"field at t = {meta['t']}"
        curves.append((x, u))
        ax.plot(x, u, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(f"profile overlay at t = {t_eval:g}")
    ax.legend()
    _save(fig, spec)
    return RenderResult(path=spec.output, series={"t": t_eval, "curves": curves})


def _render_barrier(spec: FigureSpec) -> RenderResult:
    path = spec.inputs[0]
    meta, cols = read_table(path)
    need_columns(path, cols, ["abs_x", "L_phi", "phi_p", "margin"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.2))
    r = cols["abs_x"]
    ax1.plot(r, cols["L_phi"], label="L phi")
    ax1.plot(r, cols["phi_p"], label="phi^p")
    ax1.set_yscale("log")
    ax1.set_xlabel("|x|")
    ax1.legend()
    ax2.plot(r, cols["margin"], color="tab:green")
    ax2.axhline(0.0, color="k", lw=0.8)
    ax2.set_xlabel("|x|")
    ax2.set_ylabel("L phi - phi^p")
    fig.suptitle("barrier margins" + (f" (C2 = {meta['C2']})" if "C2" in meta else ""))
    _save(fig, spec)
    return RenderResult(path=spec.output,
                        series={"abs_x": r, "margin": cols["margin"]})


def _render_wbounds(spec: FigureSpec) -> RenderResult:
    if len(spec.inputs) < 2:
        raise SchemaError("wbounds needs the field CSV and the constants CSV")
    field_path, const_path = spec.inputs[0], spec.inputs[1]
    fmeta, fcols = read_table(field_path)
    need_columns(field_path, fcols, ["t", "x", "W"])
    cmeta, ccols = read_table(const_path)
    need_columns(const_path, ccols, ["c1", "c2", "c3"])
    need_meta(field_path, fmeta, ["N"])
    n_dim = int(float(fmeta["N"]))
    c1, c2, c3 = (float(ccols[k][0]) for k in ("c1", "c2", "c3"))

    fig, ax = plt.subplots(figsize=FIGSIZE)
    series = {}
    for t in np.unique(fcols["t"]):
        sel = fcols["t"] == t
        x, w = fcols["x"][sel], fcols["W"][sel]
        order = np.argsort(x)
        x, w = x[order], w[order]
        envelope = np.minimum(c1 * t, c3 * t ** (-n_dim / 2.0)) * np.ones_like(x)
        outside = np.abs(x) > 0
        envelope[outside] = np.minimum(
            envelope[outside], c2 * t / np.abs(x[outside]) ** (n_dim + 2))
        line, = ax.plot(x, np.maximum(w, 1e-300), label=f"W at t = {t:g}")
        ax.plot(x, envelope, "--", lw=0.9, color=line.get_color())
        series[float(t)] = (x, w, envelope)
    ax.set_yscale("log")
    ax.set_ylim(bottom=1e-18)
    ax.set_xlabel("x")
    ax.set_ylabel("W")
    ax.set_title("regular part vs bound envelopes (dashed)")
    ax.legend()
    _save(fig, spec)
    return RenderResult(path=spec.output, series=series)


_RENDERERS = {
    "decay": _render_decay,
    "overlay": _render_overlay,
    "barrier": _render_barrier,
    "wbounds": _render_wbounds,
}


def render(spec: FigureSpec) -> RenderResult:
    return _RENDERERS[spec.kind](spec)
