"""Exception types raised across the package."""


class ParameterDomainError(ValueError):
    """A parameter lies outside its admissible domain."""


class DegenerateSampleError(ValueError):
    """A sample has no usable spread (zero IQR, too few points)."""


class FitError(RuntimeError):
    """The asymptotic-likelihood fit could not produce an estimate.

    ``best`` carries the best-so-far fit when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EstimationError(RuntimeError):
    """Every split of a split-sample estimate failed."""


class TableBuildError(RuntimeError):
    """A McCulloch lookup table failed validation."""
