"""Exception hierarchy shared by every module of the package."""


class BoundaryLabError(Exception):
    """Base class for all errors raised by boundary_lab."""

    #: operation name reported in CLI summaries
    operation: str = ""


class NumericalError(BoundaryLabError):
    """A numerical operation could not produce a trustworthy result."""


class ValidationError(BoundaryLabError, ValueError):
    """Inputs violate a documented precondition."""


# numeric kernel
class DimensionMismatch(ValidationError):
    pass


class NonFiniteEntries(ValidationError):
    pass


class SingularMatrix(NumericalError):
    pass


class NotHermitian(ValidationError):
    pass


class NoConvergence(NumericalError):
    pass


# boundary model
class GridTooSmall(ValidationError):
    pass


class ConstraintEliminationFailed(NumericalError):
    pass


class LambdaInSpectrum(NumericalError):
    pass


class FeedbackSingular(NumericalError):
    pass


# semigroup engine / diagnostics
class NegativeTime(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class BadExponent(ValidationError):
    pass


class GridTooShort(ValidationError):
    pass


class MuBelowGrowthBound(ValidationError):
    pass


# volterra
class KernelNotAdmissible(ValidationError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class StepUnstable(NumericalError):
    pass


# cli
class ConfigError(ValidationError):
    pass


class MissingColumn(ValidationError):
    pass
