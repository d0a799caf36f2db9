"""Exception hierarchy."""


class LegquantError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(LegquantError, ValueError):
    pass


class DegenerateConfigurationError(LegquantError):
    """Input violates a transversality or rank assumption."""


class NotLagrangianError(DegenerateConfigurationError):
    pass


class SingularMatrixError(LegquantError):
    pass


class ChartDomainError(LegquantError, ValueError):
    pass


class NotInZeroLocusError(DegenerateConfigurationError):
    pass


class NotLocallyFreeError(DegenerateConfigurationError):
    pass


class DegenerateReturnSetError(DegenerateConfigurationError):
    """The solution set of a return-element problem is not isolated."""


class SolverError(LegquantError):
    pass


class QuadratureConvergenceError(LegquantError):
    pass


class UnsupportedCaseError(LegquantError):
    pass


class UnresolvedOscillationError(LegquantError):
    def __init__(self, message: str, dominant_period: int | None = None):
        super().__init__(message)
        self.dominant_period = dominant_period


class ConfigError(LegquantError, ValueError):
    pass
