"""Exception types shared across the package."""


class GuampError(Exception):
    """Base class for package errors."""


class InvalidParameterError(GuampError, ValueError):
    """A parameter is outside its documented domain."""


class DegenerateSignalError(GuampError, ValueError):
    """A reference signal that must be nonzero is zero."""


class UnsupportedOperationError(GuampError, ValueError):
    """The requested operation is undefined for the given channel."""


class OracleError(GuampError, RuntimeError):
    """The quadrature oracle failed to converge; certification must halt."""


class ConfigError(GuampError, ValueError):
    """A sweep configuration failed validation.

    ``field`` names the offending entry so the CLI can point at it.
    """

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field
