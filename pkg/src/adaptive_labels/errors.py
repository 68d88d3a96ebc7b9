"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """An input lies outside an operation's mathematical domain."""


class DegenerateVectorError(DomainError):
    """A vector's norm is too close to zero for a direction to be defined."""


class NumericError(ArithmeticError):
    """A computation produced NaN or infinity."""


class GraphError(RuntimeError):
    """Misuse of the autodiff graph (non-scalar root, reused graph)."""


class ConfigError(ValueError):
    """Invalid configuration."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""
