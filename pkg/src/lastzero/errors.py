"""Exception types shared across the package."""


class LastZeroError(Exception):
    """Base class for all package errors."""


class DomainError(LastZeroError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class NumericError(LastZeroError, RuntimeError):
    """A numerical routine failed (bracketing, root residual, ...)."""


class UnsupportedModelError(LastZeroError, ValueError):
    """The requested operation is not implemented for this model class."""


class InvariantError(LastZeroError, RuntimeError):
    """A computed quantity violated an invariant beyond floating slack."""


class ConfigError(LastZeroError, ValueError):
    """A run configuration file is malformed or inconsistent."""
