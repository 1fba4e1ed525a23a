"""Gridded spatial states on a truncated box or periodic torus.

A field carries its far-field tail law so that convolutions near the box
boundary can be padded with physically meaningful values instead of zeros:
the solutions of interest decay like ``|x|^(-2/(p-1))`` and zero padding
would inject an artificial boundary layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable, Union

import numpy as np

from .errors import ConfigError

__all__ = [
    "Grid",
    "ZeroTail",
    "PowerTail",
    "Field",
    "CompactBump",
    "PowerTailDatum",
    "Constant",
    "Custom",
    "sample_datum",
    "norms",
    "weighted_sup",
    "fit_tail_amplitude",
]

TRUNCATED = "truncated"
PERIODIC = "periodic"


@dataclass(frozen=True)
class Grid:
    """Cell-centered uniform grid on [-L, L]^N, nodes at x = (i + 1/2) h - L."""

    N: int
    L: float
    h: float
    mode: str = TRUNCATED

    def __post_init__(self):
        if self.N not in (1, 2):
            raise ConfigError(f"unsupported dimension N={self.N}")
        if self.mode not in (TRUNCATED, PERIODIC):
            raise ConfigError(f"unknown domain mode {self.mode!r}")
        n = 2.0 * self.L / self.h
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(
                f"grid does not tile the box: 2L/h = {n} is not an integer")

    @property
    def n(self) -> int:
        """Nodes per axis."""
        return int(round(2.0 * self.L / self.h))

    def axis(self) -> np.ndarray:
        return -self.L + (np.arange(self.n) + 0.5) * self.h

    def coords(self) -> np.ndarray:
        """Node coordinates, shape (n,) for N=1 and (n, n, 2) for N=2."""
        x = self.axis()
        if self.N == 1:
            return x
        gx, gy = np.meshgrid(x, x, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    def radii(self) -> np.ndarray:
        """|x| at every node."""
        x = self.axis()
        if self.N == 1:
            return np.abs(x)
        gx, gy = np.meshgrid(x, x, indexing="ij")
        return np.sqrt(gx * gx + gy * gy)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.N


@dataclass(frozen=True)
class ZeroTail:
    def evaluate(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class PowerTail:
    """u(x) ~ A_eff |x|^(-q) for |x| beyond the box."""

    A_eff: float
    q: float

    def __post_init__(self):
        if self.A_eff < 0 or self.q <= 0:
            raise ConfigError("PowerTail requires A_eff >= 0 and q > 0")

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = self.A_eff * r[pos] ** (-self.q)
        return out


TailLaw = Union[ZeroTail, PowerTail]


@dataclass
class Field:
    """Values sampled on a grid, plus time stamp and tail law."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0
    tail: TailLaw = dc_field(default_factory=ZeroTail)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if self.grid.mode == PERIODIC and isinstance(self.tail, PowerTail):
            raise ConfigError("periodic fields must carry ZeroTail (tail is unused)")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.t, self.tail)

    def with_values(self, values: np.ndarray, t: float | None = None) -> "Field":
        return Field(self.grid, values, self.t if t is None else t, self.tail)


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class CompactBump:
    amplitude: float
    radius: float = 1.0

    def __post_init__(self):
        if self.amplitude < 0 or self.radius <= 0:
            raise ConfigError("CompactBump requires amplitude >= 0 and radius > 0")


@dataclass(frozen=True)
class PowerTailDatum:
    """A (1 + |x|^2)^(-1/(p-1)), which carries the critical tail A |x|^(-2/(p-1))."""

    A: float
    p: float

    def __post_init__(self):
        if self.A < 0:
            raise ConfigError("PowerTailDatum requires A >= 0")
        if self.p <= 1:
            raise ConfigError("PowerTailDatum requires p > 1")


@dataclass(frozen=True)
class Constant:
    c: float

    def __post_init__(self):
        if self.c < 0:
            raise ConfigError("Constant datum requires c >= 0")


@dataclass(frozen=True)
class Custom:
    sampler: Callable[[np.ndarray], np.ndarray]
    tail: TailLaw = dc_field(default_factory=ZeroTail)


DatumSpec = Union[CompactBump, PowerTailDatum, Constant, Custom]


def sample_datum(spec: DatumSpec, grid: Grid) -> Field:
    """Evaluate a datum at the grid nodes and attach the matching tail law."""
    r = grid.radii()
    if isinstance(spec, CompactBump):
        values = np.zeros(grid.shape)
        inside = r < spec.radius
        s2 = (r[inside] / spec.radius) ** 2
        values[inside] = spec.amplitude * np.exp(1.0 - 1.0 / (1.0 - s2))
        tail: TailLaw = ZeroTail()
    elif isinstance(spec, PowerTailDatum):
        q = 2.0 / (spec.p - 1.0)
        values = spec.A * (1.0 + r * r) ** (-1.0 / (spec.p - 1.0))
        tail = PowerTail(A_eff=spec.A, q=q) if grid.mode == TRUNCATED else ZeroTail()
    elif isinstance(spec, Constant):
        if grid.mode != PERIODIC:
            raise ConfigError("Constant datum is only integrable on the periodic torus")
        values = np.full(grid.shape, spec.c)
        tail = ZeroTail()
    elif isinstance(spec, Custom):
        coords = grid.coords()
        values = np.asarray(spec.sampler(coords), dtype=float)
        tail = spec.tail if grid.mode == TRUNCATED else ZeroTail()
    else:
        raise ConfigError(f"unknown datum spec {spec!r}")
    return Field(grid=grid, values=values, t=0.0, tail=tail)


def _sphere_surface(N: int) -> float:
    # |S^{N-1}|: 2 for N=1, 2*pi for N=2
    return 2.0 if N == 1 else 2.0 * math.pi


def norms(f: Field) -> tuple[float, float]:
    """(sup norm, L1 mass); the mass adds the analytic tail integral for PowerTail.

    A tail exponent q <= N makes the mass infinite; that case is reported as
    ``math.inf`` rather than an error, since it is exactly the divergence the
    very-singular regime exploits.
    """
    sup = float(np.max(np.abs(f.values))) if f.values.size else 0.0
    mass = float(np.sum(f.values) * f.grid.cell_volume)
    if isinstance(f.tail, PowerTail) and f.tail.A_eff > 0:
        q, N, L = f.tail.q, f.grid.N, f.grid.L
        if q <= N:
            return sup, math.inf
        mass += f.tail.A_eff * _sphere_surface(N) * L ** (N - q) / (q - N)
    return sup, mass


def weighted_sup(f: Field, q: float) -> float:
    """max over nodes of (1 + |x|)^q * u(x)."""
    if q < 0:
        raise ValueError(f"weight exponent must be >= 0, got {q}")
    r = f.grid.radii()
    return float(np.max((1.0 + r) ** q * f.values))


def fit_tail_amplitude(f: Field, q: float, annulus_fraction: float = 0.1) -> float:
    """Least-squares amplitude of the fixed-exponent tail law on the outer annulus.

    Fits log u = log A - q log|x| with the exponent held at q, over nodes with
    |x| >= (1 - annulus_fraction) L.  Nonpositive values are excluded; if the
    annulus carries no signal the fit returns 0.
    """
    r = f.grid.radii()
    mask = (r >= (1.0 - annulus_fraction) * f.grid.L) & (f.values > 0) & (r > 0)
    if not np.any(mask):
        return 0.0
    log_a = np.log(f.values[mask]) + q * np.log(r[mask])
    return float(np.exp(np.mean(log_a)))


def refit_tail(f: Field) -> Field:
    """Update A_eff from the outer annulus; no-op for ZeroTail/periodic fields."""
    if not isinstance(f.tail, PowerTail):
        return f
    a_eff = fit_tail_amplitude(f, f.tail.q)
    return replace(f, tail=PowerTail(A_eff=a_eff, q=f.tail.q))
