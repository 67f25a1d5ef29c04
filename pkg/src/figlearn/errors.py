"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class FileFormatError(ValidationError):
    """A data file could not be parsed.

    ``line`` is the 1-based line number of the offending line, when known.
    """

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NumericalError(ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite values)."""
