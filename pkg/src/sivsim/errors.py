"""Exception hierarchy shared across the package."""


class SivError(Exception):
    """Base class for all errors raised by sivsim."""


class DomainError(SivError, ValueError):
    """An argument lies outside the domain of an operation."""


class InsufficientDataError(SivError):
    """Too few samples, photons or records for the requested estimate."""


class SingularSystemError(SivError, ArithmeticError):
    """A linear system or generator has no unique solution."""


class ConfigError(SivError):
    """A run configuration failed schema validation."""

    def __init__(self, message, errors=()):
        super().__init__(message)
        self.errors = list(errors)
