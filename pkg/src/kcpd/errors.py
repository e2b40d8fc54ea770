"""Exception types shared across the package."""


class KcpdError(Exception):
    """Base class for all library errors."""


class ParameterError(KcpdError, ValueError):
    """An argument violates a documented precondition."""


class ShapeError(ParameterError):
    """Operands have incompatible dimensions."""


class StateError(KcpdError, RuntimeError):
    """An operation was invoked in an invalid order (e.g. backward twice)."""


class NumericError(KcpdError, ArithmeticError):
    """A computation produced non-finite values."""


class ConfigError(KcpdError):
    """A run configuration is incomplete or inconsistent for the requested mode."""


class DataError(KcpdError):
    """An input file or series is malformed."""


class MetricError(KcpdError):
    """A metric is undefined for the given inputs (e.g. AUC with a single class)."""
