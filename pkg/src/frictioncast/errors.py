"""Exception types shared across the package."""


class FrictionCastError(Exception):
    """Base class for all package errors."""


class ShapeError(FrictionCastError, ValueError):
    """Operand shapes are incompatible."""


class DataError(FrictionCastError, ValueError):
    """Malformed or unusable input data."""


class ConfigError(FrictionCastError, ValueError):
    """Invalid configuration."""


class UnimputedValueError(FrictionCastError, ValueError):
    """A missing-value sentinel reached a model that cannot handle it."""


class DivergenceError(FrictionCastError, RuntimeError):
    """Training produced a non-finite loss."""
