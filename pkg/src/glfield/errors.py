"""Exception hierarchy shared by every glfield module."""


class GLFieldError(Exception):
    """Base class for all errors raised by glfield."""


class DomainError(GLFieldError, ValueError):
    """An argument lies outside the domain of the operation."""


class BlowUpExceeded(DomainError):
    """A quadratic flow was evaluated at or beyond its blow-up time."""


class KindError(GLFieldError, TypeError):
    """The operation is not defined for this kind of dynamics."""


class PreconditionError(GLFieldError, ValueError):
    """A documented precondition of an engine call does not hold."""


class EngineInvariantViolation(GLFieldError, RuntimeError):
    """An internal invariant of an event-driven engine was broken."""


class StabilityError(GLFieldError, ValueError):
    """An explicit time step violates the stability bound of a scheme."""


class ConfigError(GLFieldError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """The configuration file is not valid JSON."""


class SchemaError(ConfigError):
    """A configuration key is missing or unknown."""


class ValidationError(ConfigError, ValueError):
    """A configuration value violates an invariant.

    ``field`` holds the dotted path of the offending entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
