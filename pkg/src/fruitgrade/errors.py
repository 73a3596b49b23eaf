"""Exception types raised across the grading pipeline."""


class FruitGradeError(ValueError):
    """Base class for all data/processing errors of this package."""


class DegenerateHistogram(FruitGradeError):
    pass


class NoMarkers(FruitGradeError):
    pass


class FrameNotFound(FruitGradeError):
    pass


class NoForeground(FruitGradeError):
    pass


class EmptyMask(FruitGradeError):
    pass


class DegenerateRegion(FruitGradeError):
    pass


class EmptySamples(FruitGradeError):
    pass


class NoPairs(FruitGradeError):
    pass


class TooFewRows(FruitGradeError):
    pass


class TooFewSamples(FruitGradeError):
    pass


class NumericalFailure(FruitGradeError):
    pass


class DimensionMismatch(FruitGradeError):
    pass


class ZeroVector(FruitGradeError):
    pass


class SingularNormalEquations(FruitGradeError):
    pass
