"""Exception types raised across the package."""


class FtsError(ValueError):
    """Base class for all errors raised by intradayfts."""


# curves
class MalformedLine(FtsError):
    def __init__(self, line_no, detail=""):
        self.line_no = line_no
        super().__init__(f"malformed tick line {line_no}" + (f": {detail}" if detail else ""))


class NonPositiveValue(FtsError):
    def __init__(self, line_no):
        self.line_no = line_no
        super().__init__(f"non-positive index value on line {line_no}")


class EmptyDay(FtsError):
    def __init__(self, day_id):
        self.day_id = day_id
        super().__init__(f"day {day_id} has no ticks")


class GridMismatch(FtsError):
    pass


class AlreadyTransformed(FtsError):
    pass


class ScaleError(FtsError):
    pass


class TooFewCurves(FtsError):
    pass


# fpca
class DegeneratePanel(FtsError):
    pass


class AllZero(FtsError):
    pass


class AllZeroResiduals(FtsError):
    pass


class NoConvergence(FtsError):
    def __init__(self, k):
        self.k = k
        super().__init__(f"rank-one fit {k} did not converge")


class NoConvergenceWarning(UserWarning):
    pass


# score_forecast
class SeriesTooShort(FtsError):
    pass


class NoAdmissibleModel(FtsError):
    pass


class InsufficientData(FtsError):
    pass


class SingularDesign(FtsError):
    pass


# updating
class DimensionMismatch(FtsError):
    pass


class InsufficientObservation(FtsError):
    pass


class SingularScoreDesign(FtsError):
    pass


class EmptyGrid(FtsError):
    pass


class SplitTooSmall(FtsError):
    pass


# intervals
class HistoryTooShort(FtsError):
    pass


# metrics
class ShapeMismatch(FtsError):
    pass


class InvertedInterval(FtsError):
    pass


class DegenerateLossDifferential(FtsError):
    pass


# simulate
class UnstableKernel(FtsError):
    pass


# cli
class ConfigError(FtsError):
    pass
