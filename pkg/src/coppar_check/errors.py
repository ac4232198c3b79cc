"""Exception hierarchy shared by every module in the package."""


class ConsistencyToolError(Exception):
    """Base class for errors raised by this package."""


class WellFormednessError(ConsistencyToolError):
    """A history's invocations and responses do not pair up per process."""


class PreconditionError(ConsistencyToolError, ValueError):
    """An operation was called with input outside its documented domain."""


class HistoryFormatError(ConsistencyToolError, ValueError):
    """A history or broadcast-log file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProtocolError(ConsistencyToolError):
    """The broadcast layer was asked to do something it must refuse."""


class SimulatorBug(ConsistencyToolError, AssertionError):
    """An internal simulator invariant broke; this is never expected."""
