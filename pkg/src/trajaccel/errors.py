"""Exception types shared across the package."""


class TrajAccelError(Exception):
    """Base class for all package errors."""


class InvalidInputError(TrajAccelError, ValueError):
    """Raised on non-finite or malformed numerical input."""


class SingularSystemError(TrajAccelError, ArithmeticError):
    """Raised when a linear system is numerically singular."""


class InvalidConfigError(TrajAccelError, ValueError):
    """Raised when parameters violate a solver or constructor precondition."""


class InvalidProblemError(TrajAccelError, ValueError):
    """Raised when problem data cannot define a valid oracle."""


class UndefinedAngleError(TrajAccelError, ValueError):
    """Raised when an angle involves a zero vector."""


class ParseError(TrajAccelError, ValueError):
    """Raised on malformed text input.

    Parameters
    ----------
    message : str
        Human readable description.
    line : int, optional
        1-based line number of the offending line.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DivergenceError(TrajAccelError, RuntimeError):
    """Raised when an iteration blows up; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
