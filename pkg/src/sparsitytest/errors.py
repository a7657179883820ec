"""Exception hierarchy.

Validation failures derive from :class:`ValidationError` (CLI exit code 2) and
floating-point failures from :class:`NumericalError` (CLI exit code 3).
"""


class SparsityTestError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SparsityTestError, ValueError):
    """An input violates a documented domain or precondition."""


class NumericalError(SparsityTestError, ArithmeticError):
    """A computation overflowed or failed to converge."""


class DomainError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class EmptyVector(ValidationError):
    pass


class InsufficientSamples(ValidationError):
    pass


class UnsupportedSampler(ValidationError):
    pass


class ResourceLimit(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class MomentTruncationError(ValidationError):
    """Exact moments are not available up to the requested order."""

    def __init__(self, available: int, requested: int):
        super().__init__(
            f"exact moments available only through order {available}, "
            f"order {requested} requested"
        )
        self.available = available
        self.requested = requested


class DegenerateCumulant(ValidationError):
    """A cumulant needed as a divisor is zero (or below the configured floor)."""


class GaussianObstruction(DegenerateCumulant):
    """No nonzero cumulant beyond order 2 was found: the marginal looks Gaussian."""


class RootNotFound(NumericalError):
    pass
