"""Exception types shared across the package."""


class SpecSplitError(Exception):
    """Base class for all package errors."""


class ArgumentError(SpecSplitError, ValueError):
    pass


class ShapeError(SpecSplitError, ValueError):
    pass


class FormatError(SpecSplitError, ValueError):
    pass


class TruncationError(FormatError):
    pass


class DataError(SpecSplitError, ValueError):
    pass


class UndefinedMetricError(SpecSplitError, ValueError):
    pass


class DivergenceError(SpecSplitError, ArithmeticError):
    """Raised when the training loss becomes non-finite.

    ``checkpoint`` holds the last parameter set whose loss was finite.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
