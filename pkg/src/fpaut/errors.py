"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: parse errors exit 2, validation and
precondition failures exit 3, and check failures (a command whose verdict
is negative) exit 1 without an exception.
"""


class FpError(Exception):
    """Base class for all package errors."""


class ParseError(FpError):
    """Malformed textual input (words, paths, instance files)."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}: {message}" if column is None else \
                f"line {line}, col {column}: {message}"
        super().__init__(message)


class ValidationError(FpError):
    """An invariant of a declared object does not hold."""


class PreconditionError(FpError):
    """An operation was called outside its stated preconditions."""


class StagnationError(FpError):
    """A ray extender failed to make progress."""

    def __init__(self, message, probe_depth=None):
        self.probe_depth = probe_depth
        if probe_depth is not None:
            message = f"{message} (probe depth {probe_depth})"
        super().__init__(message)


class JunctionCancellationError(FpError):
    """A ray segment attached with non-zero junction cancellation."""

    def __init__(self, level, cancelled):
        self.level = level
        self.cancelled = cancelled
        super().__init__(
            f"segment junction at level {level} cancels ({cancelled} reduction events)")


class SearchExhausted(FpError):
    """A bounded search ran out of candidates."""

    def __init__(self, message, radius=None, power_cap=None):
        self.radius = radius
        self.power_cap = power_cap
        super().__init__(message)
