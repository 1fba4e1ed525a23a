"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class ResolutionError(ValueError):
    """Grid too coarse to resolve a kernel or stencil."""


class CoverageError(ValueError):
    """Requested region not covered by the available grid/box."""


class BracketError(ValueError):
    """Shooting bracket endpoints do not classify as required."""


class SchedulingError(ValueError):
    """Required snapshot/checkpoint times missing from a trajectory."""


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration failed to converge (step size too large)."""


class AmbiguousTailError(RuntimeError):
    """Tail-constant map was not monotone across the probe ladder."""

    def __init__(self, message, probes=None):
        super().__init__(message)
        self.probes = probes or []


class StepRejectedError(RuntimeError):
    """Time step rejected by the positivity guard."""

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt
