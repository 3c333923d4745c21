"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
EstimationError -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad spec, bad option value, schema violation."""


class DataError(ValueError):
    """Invalid or inconsistent input data."""


class EstimationError(RuntimeError):
    """An estimation step could not be completed."""

    #: threshold annotation set by distribution-regression drivers
    threshold = None


class PerfectSeparationError(EstimationError):
    """Logit likelihood is unbounded along a separating direction."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class CollinearDesignError(EstimationError):
    """Design matrix is numerically rank deficient."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ConvergenceError(EstimationError):
    """Iteration limit reached without meeting the score tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EmptyTrimmedSampleError(EstimationError):
    """Trimming removed every wage observation."""


class EmptySelectionError(EstimationError):
    """No composition row passes the counterfactual selection rule."""
