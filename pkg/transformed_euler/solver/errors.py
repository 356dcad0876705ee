"""Exceptions raised by the solver backend.

Everything derives from `SolverError`, so the command line can catch a single class
and report it. The second base of each class is the closest built-in exception, so
callers that only know about e.g. `ValueError` still behave sensibly.
"""


class SolverError(Exception):
    """Base class for all errors raised by transformed_euler."""


class ExpressionError(SolverError, ValueError):
    """An expression could not be parsed.

    `position` is the byte offset into the UTF-8 encoded source, `kind` is one of
    `syntax`, `unknown identifier` or `arity`.
    """

    def __init__(
        self,
        message: str,
        position: int,
        kind: str = "syntax",
        expected: tuple[str, ...] = (),
        source: str = "",
    ):
        self.position = position
        self.kind = kind
        self.expected = expected
        self.source = source
        super().__init__(f"{kind} error at byte {position}: {message}")


class DomainError(SolverError, ArithmeticError):
    """A branch expression produced a non-finite value.

    For array input `index` is the flat position of the first offending element.
    """

    def __init__(self, message: str, x: float | None = None, index: int | None = None):
        self.x = x
        self.index = index
        super().__init__(message)


class BreakpointError(SolverError, ValueError):
    """Breakpoints are duplicated, unordered or non-finite."""

    def __init__(self, index: int, reason: str, value: float | None = None):
        self.index = index
        self.reason = reason
        self.value = value
        super().__init__(f"breakpoint {index} ({value}) is {reason}")


class AssumptionError(SolverError, ValueError):
    """The coefficients violate the ellipticity or Lipschitz requirements."""

    def __init__(
        self,
        message: str,
        kind: str,
        location: float | None = None,
        branch: int | None = None,
    ):
        self.kind = kind
        self.location = location
        self.branch = branch
        super().__init__(message)


class InversionError(SolverError, RuntimeError):
    """Inverting the transform failed to converge. Should never happen."""


class PathError(SolverError, ArithmeticError):
    """A simulated path reached a non-finite state."""

    def __init__(
        self,
        step: int,
        path: int | None = None,
        level: int | None = None,
        reason: str = "non-finite state",
    ):
        self.step = step
        self.path = path
        self.level = level
        self.reason = reason
        super().__init__(self._describe())

    def _describe(self):
        where = [f"step {self.step}"]
        if self.path is not None:
            where.insert(0, f"path {self.path}")
        if self.level is not None:
            where.insert(0, f"level {self.level}")
        return f"{self.reason} at " + ", ".join(where)

    def at(self, path: int | None = None, level: int | None = None):
        """Return a copy of the error with the path and/or level coordinates set."""
        return PathError(
            self.step,
            path=self.path if path is None else path,
            level=self.level if level is None else level,
            reason=self.reason,
        )


class ConfigError(SolverError, ValueError):
    """A configuration file is malformed or contains invalid values."""

    def __init__(
        self,
        message: str,
        path: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ):
        self.path = path
        self.line = line
        self.column = column
        location = ""
        if path is not None:
            location += f"{path}"
        if line is not None:
            location += f":{line}"
            if column is not None:
                location += f":{column}"
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
