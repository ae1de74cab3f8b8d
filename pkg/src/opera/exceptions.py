"""Exception hierarchy shared across the package."""


class OpeError(Exception):
    """Base class for errors raised by this package."""


class SupportViolationError(OpeError, ValueError):
    """A logged action has zero behavior probability."""


class DegenerateWeightsError(OpeError, ValueError):
    """All importance weights are zero."""


class InsufficientDataError(OpeError, ValueError):
    """Not enough trajectories for the requested operation."""


class UnstableEstimatorError(OpeError, RuntimeError):
    """An estimator failed on too many bootstrap resamples."""


class InvalidErrorMatrixError(OpeError, ValueError):
    """The error matrix is not symmetric positive semidefinite."""


class ConfigError(OpeError, ValueError):
    """An experiment or environment configuration is invalid."""
