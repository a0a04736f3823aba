"""Exception hierarchy shared by every bolalab module."""


class BolaLabError(Exception):
    """Base class; the CLI maps subclasses onto exit codes."""

    exit_code = 2


class InvalidManifestError(BolaLabError, ValueError):
    pass


class ParameterError(BolaLabError, ValueError):
    pass


class TraceParseError(BolaLabError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SimulationError(BolaLabError, RuntimeError):
    exit_code = 3


class StallError(SimulationError):
    """A download can never finish because the trace has run dry."""


class OracleError(BolaLabError, RuntimeError):
    exit_code = 3


class ResourceError(OracleError):
    pass
