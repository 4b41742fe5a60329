"""Exception hierarchy shared by all modules."""


class AccMDError(Exception):
    """Base class for library errors."""


class DimensionError(AccMDError, ValueError):
    """Operand shapes do not match."""


class DomainError(AccMDError, ValueError):
    """A point lies outside the domain of a mirror function or objective."""


class ConfigurationError(AccMDError, ValueError):
    """Inconsistent problem or solver configuration."""


class StepError(AccMDError, FloatingPointError):
    """A solver step produced a non-finite or out-of-domain iterate."""

    def __init__(self, message, k=None, diagnostics=None):
        super().__init__(message)
        self.k = k
        self.diagnostics = diagnostics or {}


class ParseError(AccMDError, ValueError):
    """Malformed dataset file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
