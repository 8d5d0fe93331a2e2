"""Exception hierarchy shared by every holehom module."""


class HolehomError(Exception):
    """Base class for all holehom failures"""


class ConfigError(HolehomError):
    """Configuration failed validation. Maps to exit code 2."""


class AdmissibilityError(HolehomError):
    """An inclusion set violates the diameter cap or separation condition"""


class NonConvergence(HolehomError):
    """Iterative solve stopped above tolerance"""

    def __init__(self, message: str, stats=None):
        super().__init__(message)
        self.stats = stats


class SingularGram(HolehomError):
    """Gram matrix of the corrected affine family is numerically singular on a ball"""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class ScaleMismatch(HolehomError):
    """Corrector bundle and epsilon-field describe different microstructures"""


class DegenerateVariance(HolehomError):
    """A variance entering a log-log fit is zero"""


class TooFewTailPoints(HolehomError):
    """Not enough distinct upper-tail values for a survival fit"""


class FailureBudgetExceeded(HolehomError):
    """More than the allowed fraction of ensemble samples failed. Maps to exit code 3."""

    def __init__(self, message: str, failures: int, total: int):
        super().__init__(message)
        self.failures = failures
        self.total = total
