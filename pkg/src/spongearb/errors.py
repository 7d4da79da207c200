"""Exception hierarchy shared across the package."""


class DataError(ValueError):
    """Input data is missing, malformed or violates an invariant."""


class ParseError(DataError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NumericError(ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class InvalidSpecError(ValueError):
    """A hyperparameter combination the estimator does not support."""
