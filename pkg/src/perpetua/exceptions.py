"""Exception types raised across the package."""


class PerpetuaError(Exception):
    """Base class for every error raised by perpetua."""


class ModelError(PerpetuaError, ValueError):
    pass


class NonSymmetric(ModelError):
    pass


class NotPositiveDefinite(ModelError):
    pass


class NegativeRate(ModelError):
    pass


class NegativeDividend(ModelError):
    pass


class NonPositiveState(PerpetuaError, ValueError):
    pass


class NonPositiveDt(PerpetuaError, ValueError):
    pass


class EmptyTimes(PerpetuaError, ValueError):
    pass


class NonMonotoneTimes(PerpetuaError, ValueError):
    pass


class DimensionMismatch(PerpetuaError, ValueError):
    pass


class UnsupportedDimension(PerpetuaError, ValueError):
    pass


class GridTooCoarse(PerpetuaError, ValueError):
    pass


class AssumptionViolation(PerpetuaError, ValueError):
    """The payoff/model pair fails (A1), (A2) or the Psi^- growth condition."""


class ZeroRate(AssumptionViolation):
    pass


class NumericalError(PerpetuaError, RuntimeError):
    """Base for failures of an iterative or statistical procedure."""


class PsorDivergence(NumericalError):
    pass


class RegressionSingular(NumericalError):
    pass


class HorizonExplosion(NumericalError):
    pass


class TooFewPaths(PerpetuaError, ValueError):
    pass


class EmptyExerciseRegion(PerpetuaError):
    pass


class OracleGridMismatch(PerpetuaError, ValueError):
    pass


class ParseError(PerpetuaError, ValueError):
    pass
