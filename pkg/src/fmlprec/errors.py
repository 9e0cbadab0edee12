"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class ParseError(ValueError):
    """A line of an input file could not be parsed."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class EmptyDatasetError(ValueError):
    """Preprocessing removed every interaction."""


class FormatError(ValueError):
    """A binary checkpoint or cache file is malformed."""


class EvaluationError(ArithmeticError):
    """A function under evaluation produced a non-finite value."""


class TrainingAbortedError(RuntimeError):
    """Training stopped because of a non-finite gradient or loss."""
