"""Exception hierarchy. The CLI maps these onto exit codes."""


class AHBError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AHBError):
    """Invalid parameters or flag combinations."""


class SchemaError(ConfigError):
    """A column named by the schema is missing or misdeclared."""


class ValidationError(AHBError):
    """Input data violates a documented invariant."""


class ParseError(AHBError):
    """A file could not be parsed."""


class InfeasibleError(AHBError):
    """No box satisfies the matching constraints for a unit."""

    def __init__(self, message, unit=None):
        super().__init__(message)
        self.unit = unit


class MethodUnavailableError(AHBError):
    """The requested method needs a capability the inputs do not provide."""
