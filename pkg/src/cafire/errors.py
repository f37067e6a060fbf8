"""Exception hierarchy. The CLI maps each family to an exit code."""


class CafireError(Exception):
    pass


class ConfigError(CafireError, ValueError):
    """Invalid or inconsistent configuration."""


class DataError(CafireError, ValueError):
    """Input data violates a documented precondition."""


class DimensionError(DataError):
    pass


class NumericalError(CafireError, ArithmeticError):
    """A linear-algebra or sampling step failed numerically."""
