"""Exception types raised across the package."""


class GpBanditsError(Exception):
    """Base class for all package-specific errors."""


class NumericsError(GpBanditsError):
    """A linear-algebra step failed after all stabilization attempts."""


class FitError(GpBanditsError):
    """Hyperparameter fitting produced no usable result."""


class OptimizationError(GpBanditsError):
    """Every start of a multistart minimization failed."""


class SelectionError(GpBanditsError):
    """Arm selection encountered a non-finite acquisition score."""


class IngestionError(GpBanditsError):
    """A snapshot CSV file violated the documented schema."""
