"""Exception types shared across the package."""


class RidgeshiftError(Exception):
    """Base class for all package-specific errors."""


class ParseError(RidgeshiftError):
    """A data file could not be parsed; the message names the offending line."""


class ConfigurationError(RidgeshiftError):
    """A configuration value (or combination of values) is unusable."""


class SingularSystemError(RidgeshiftError):
    """The shifted normal equations are singular or too ill-conditioned to solve."""

    def __init__(self, message: str, lam: float | None = None):
        super().__init__(message)
        self.lam = lam


class DegenerateDataError(RidgeshiftError):
    """Sample statistics collapsed (zero spread, singular fitted covariance)."""


class EstimationFailureError(RidgeshiftError):
    """An importance-weight estimator failed to produce usable weights."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InfeasibleConstraintsError(RidgeshiftError):
    """The constraint set of an optimization problem is empty."""


class SelectionError(RidgeshiftError):
    """No grid point produced a finite validation risk."""
