"""Exception types shared across the package."""


class TexFieldError(Exception):
    """Base class for all errors raised by texfield."""


class DimensionError(TexFieldError, ValueError):
    """Operand shapes do not conform."""


class DomainError(TexFieldError, ValueError):
    """An input lies outside the domain of an operation."""


class ContractError(TexFieldError, ValueError):
    """A documented precondition of an API was violated."""


class NumericError(TexFieldError, ArithmeticError):
    """A NaN or infinite value was detected."""


class ParseError(TexFieldError, ValueError):
    """A file could not be parsed.

    Attributes:
        path: the offending file, if known.
        line: 1-based line number, if known.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc += ": "
        super().__init__(loc + message)
        self.path = path
        self.line = line
