class SmrkitError(Exception):
    """Base class for all errors raised by smrkit."""


class InputError(SmrkitError, ValueError):
    """Malformed or inconsistent user input (files, arguments)."""


class ParseError(InputError):
    """Syntax or schema error in a text file, with its location."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class StackFileError(ParseError):
    pass


class TouchstoneError(ParseError):
    pass


class NumericError(SmrkitError, ArithmeticError):
    """A computation produced a non-finite or singular result."""


class SingularTransformError(NumericError):
    pass


class ConversionSingularityError(NumericError):
    def __init__(self, message: str, frequency: float | None = None):
        self.frequency = frequency
        super().__init__(message)


class DegenerateMirrorError(InputError):
    pass


class InsufficientPeaksError(NumericError):
    pass
