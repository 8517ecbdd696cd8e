"""Exception types raised across the package."""


class IdmrError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(IdmrError):
    """Inputs have inconsistent or invalid dimensions."""


class DataError(IdmrError):
    """Invalid data values: negative counts, zero totals, broken invariants."""


class NumericError(IdmrError):
    """A numerical evaluation left the representable range."""


class SingularHessianError(NumericError):
    """The Newton system is numerically singular.

    ``choice`` identifies the per-choice subproblem (or diagnostic block)
    when the failure happened inside a distributed solve, else ``None``.
    """

    def __init__(self, message: str, choice: int | None = None):
        super().__init__(message)
        self.choice = choice


class ConstraintError(IdmrError):
    """Malformed or contradictory equality-constraint specification."""


class ParseError(IdmrError):
    """A data or configuration file could not be parsed.

    ``line`` is the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
