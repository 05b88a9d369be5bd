"""Exception types shared across the package."""


class TimbreKitError(Exception):
    """Base class for all package errors."""


class InvalidArgument(TimbreKitError, ValueError):
    pass


class UnsupportedRepresentation(TimbreKitError, TypeError):
    pass


class NoSignal(TimbreKitError, ValueError):
    """Input is silent where a non-silent signal is required."""


class NumericFailure(TimbreKitError, ArithmeticError):
    def __init__(self, message, position=None, probe=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position
        self.probe = probe


class InvalidWeights(TimbreKitError, ValueError):
    pass


class CorruptFile(TimbreKitError, ValueError):
    pass


class ShapeMismatch(TimbreKitError, ValueError):
    pass


class WrongNormalizationState(TimbreKitError, ValueError):
    pass


class DegenerateStats(TimbreKitError, ValueError):
    pass


class CannotSplit(TimbreKitError, ValueError):
    pass
