"""Plain key=value experiment configuration with section prefixes.

No nesting: sections are spelled as prefixes (kernel., grid., time.,
datum., picard., diag., barrier.), which keeps the format trivially
parseable from any language.  Unknown keys are rejected with a line
diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .errors import ConfigError
from .field import (CompactBump, Constant, Grid, PowerTailDatum, PERIODIC,
                    TRUNCATED)
from .evolve import EvolveParams
from .kernels import KernelSpec, build_kernel

KNOWN_KEYS = {
    "kind",
    "p",
    "scheme",
    "kernel.family", "kernel.d", "kernel.quad_resolution",
    "grid.L", "grid.h", "grid.N", "domain.mode",
    "datum.kind", "datum.amplitude", "datum.radius", "datum.A", "datum.c",
    "datum2.kind", "datum2.amplitude", "datum2.radius", "datum2.A", "datum2.c",
    "time.dt", "time.t_end", "time.checkpoint_first", "time.checkpoint_ratio",
    "time.snapshots",
    "picard.tol", "picard.max_iter",
    "conv.engine", "conv.check_oracle",
    "diag.K", "diag.window", "diag.R", "diag.t_ref", "diag.lambdas",
    "diag.quantity",
    "barrier.C1", "barrier.C2", "barrier.C2_scale",
}

KINDS = ("simulate", "profile", "barrier", "wcheck", "rates", "converge",
         "oplimit", "compare")


@dataclass
class ExperimentConfig:
    kind: str
    raw: dict = dc_field(default_factory=dict)

    def get(self, key: str, default=None) -> str | None:
        return self.raw.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.raw:
            raise ConfigError(f"missing required config key {key!r}")
        return self.raw[key]

    def get_float(self, key: str, default: float | None = None) -> float:
        val = self.raw.get(key)
        if val is None:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return default
        try:
            return float(val)
        except ValueError:
            raise ConfigError(f"config key {key!r}: {val!r} is not a number") from None

    def get_int(self, key: str, default: int | None = None) -> int:
        val = self.raw.get(key)
        if val is None:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return default
        try:
            return int(val)
        except ValueError:
            raise ConfigError(f"config key {key!r}: {val!r} is not an integer") from None

    def get_bool(self, key: str, default: bool = False) -> bool:
        val = self.raw.get(key)
        if val is None:
            return default
        if val.lower() in ("true", "1", "yes"):
            return True
        if val.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key {key!r}: {val!r} is not a boolean")

    def get_floats(self, key: str, default: tuple = ()) -> tuple:
        val = self.raw.get(key)
        if val is None or val == "":
            return default
        try:
            return tuple(float(v) for v in val.split(","))
        except ValueError:
            raise ConfigError(f"config key {key!r}: {val!r} is not a number list") from None


def parse_config_text(text: str, kind: str | None = None) -> ExperimentConfig:
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, val = stripped.partition("=")
        key, val = key.strip(), val.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        raw[key] = val
    cfg_kind = raw.get("kind", kind)
    if cfg_kind is None:
        raise ConfigError("config does not declare a kind and none was given")
    if cfg_kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {cfg_kind!r}")
    if kind is not None and cfg_kind != kind:
        raise ConfigError(f"config declares kind={cfg_kind!r} but the "
                          f"{kind!r} subcommand was invoked")
    return ExperimentConfig(kind=cfg_kind, raw=raw)


def load_config(path: str, kind: str | None = None) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), kind=kind)


def kernel_from(cfg: ExperimentConfig) -> KernelSpec:
    return build_kernel(
        family=cfg.get("kernel.family", "bump"),
        d=cfg.get_float("kernel.d", 1.0),
        N=cfg.get_int("grid.N", 1),
        quad_resolution=cfg.get_int("kernel.quad_resolution", 256),
    )


def grid_from(cfg: ExperimentConfig) -> Grid:
    mode = cfg.get("domain.mode", TRUNCATED)
    if mode not in (TRUNCATED, PERIODIC):
        raise ConfigError(f"domain.mode must be truncated or periodic, got {mode!r}")
    return Grid(N=cfg.get_int("grid.N", 1), L=cfg.get_float("grid.L"),
                h=cfg.get_float("grid.h"), mode=mode)


def datum_from(cfg: ExperimentConfig, prefix: str = "datum"):
    kind = cfg.get(f"{prefix}.kind")
    if kind is None:
        raise ConfigError(f"missing required config key '{prefix}.kind'")
    if kind == "bump":
        return CompactBump(amplitude=cfg.get_float(f"{prefix}.amplitude"),
                           radius=cfg.get_float(f"{prefix}.radius", 1.0))
    if kind == "powertail":
        return PowerTailDatum(A=cfg.get_float(f"{prefix}.A"),
                              p=cfg.get_float("p"))
    if kind == "constant":
        return Constant(c=cfg.get_float(f"{prefix}.c"))
    raise ConfigError(f"{prefix}.kind must be bump, powertail, or constant; got {kind!r}")


def evolve_params_from(cfg: ExperimentConfig) -> EvolveParams:
    return EvolveParams(
        p=cfg.get_float("p"),
        dt=cfg.get_float("time.dt"),
        t_end=cfg.get_float("time.t_end"),
        checkpoint_first=cfg.get_float("time.checkpoint_first", 0.1),
        checkpoint_ratio=cfg.get_float("time.checkpoint_ratio", 2.0),
        snapshot_times=cfg.get_floats("time.snapshots"),
        scheme=cfg.get("scheme", "etd1"),
        picard_tol=cfg.get_float("picard.tol", 1e-12),
        picard_max_iter=cfg.get_int("picard.max_iter", 50),
    )
