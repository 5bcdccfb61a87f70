"""Exception hierarchy for innerlim."""


class InnerLimError(Exception):
    """Base class for all toolkit errors."""


class NonSquare(InnerLimError, ValueError):
    pass


class NegativeEntry(InnerLimError, ValueError):
    pass


class NonFinite(InnerLimError, ValueError):
    pass


class IndexOutOfRange(InnerLimError, IndexError):
    pass


class DuplicateIndex(InnerLimError, ValueError):
    pass


class EmptySubset(InnerLimError, ValueError):
    pass


class InvalidMap(InnerLimError, ValueError):
    pass


class EmptyRegion(InnerLimError, ValueError):
    pass


class NoBoundary(InnerLimError):
    pass


class IntrinsicNotComputed(InnerLimError):
    pass


class PointNotInInnerRegion(InnerLimError, ValueError):
    pass


class EmptySpace(InnerLimError, ValueError):
    pass


class TooLarge(InnerLimError, ValueError):
    pass


class InvalidParams(InnerLimError, ValueError):
    pass


class UnsupportedDimension(InnerLimError, ValueError):
    pass


class InvalidFamilyParams(InnerLimError, ValueError):
    pass


class OutOfPage(InnerLimError, ValueError):
    pass


class InvalidPitch(InnerLimError, ValueError):
    pass


class NoEmbedding(InnerLimError):
    pass


class EffortExhausted(InnerLimError):
    pass


class InvalidTower(InnerLimError, ValueError):
    pass


class RadiusTooLarge(InnerLimError, ValueError):
    pass


class DegenerateGrid(InnerLimError, ValueError):
    pass


class InconsistentAmbient(InnerLimError, ValueError):
    pass


class ScenarioParse(InnerLimError, ValueError):
    pass


class StepFailure(InnerLimError):
    def __init__(self, index, message):
        super().__init__(f"step {index}: {message}")
        self.index = index


class IOFailure(InnerLimError, OSError):
    pass
