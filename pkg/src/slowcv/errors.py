"""Exception and warning types raised across the package."""


class SlowCVError(Exception):
    """Base class for all package errors."""


class NumericalError(SlowCVError):
    """A computation produced an unusable numerical result."""


class Diverged(NumericalError):
    """A trajectory left the finite range (step size too large)."""


class ConvergenceFailure(NumericalError):
    """An iterative solver did not converge."""


class GridTooCoarse(NumericalError):
    """The leading eigenvalue moves too much under grid refinement."""


class DegenerateFamily(NumericalError):
    """Gram-Schmidt broke down on a linearly dependent family."""


class DegenerateVariance(NumericalError):
    """A feature has (numerically) zero variance."""


class LagTooLarge(SlowCVError, ValueError):
    pass


class TooFewSamples(SlowCVError, ValueError):
    pass


class DimensionMismatch(SlowCVError, ValueError):
    pass


class TooFewBins(SlowCVError, ValueError):
    pass


class EmptyBin(NumericalError):
    pass


class ConfigError(SlowCVError, ValueError):
    """Invalid experiment configuration."""


class EmptyBinRow(UserWarning):
    """A visited Ulam bin had no outgoing transition and was dropped."""


class NotConverged(UserWarning):
    """An iteration hit its budget; the best result so far is returned."""
