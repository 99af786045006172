"""Exception hierarchy for the localization laboratory."""
from __future__ import annotations


class FsplabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FsplabError):
    """Malformed or inconsistent experiment configuration."""


class NumericalError(FsplabError):
    """A computation failed for numerical reasons."""


# constitutive
class RatioUnbounded(FsplabError):
    pass


class NotDegenerate(FsplabError):
    pass


class QuadratureDivergent(NumericalError):
    pass


class InadmissibleLambda(FsplabError):
    pass


class NonMonotoneF(FsplabError):
    pass


class AUnbounded(FsplabError):
    pass


class DegenerateRatio(FsplabError):
    pass


class DomainError(FsplabError, ValueError):
    """Argument outside the working interval of a profile."""


# solver
class CflViolation(NumericalError):
    pass


class StepBlowup(NumericalError):
    pass


class DimensionMismatch(FsplabError, ValueError):
    pass


# degiorgi / estimates
class BadB(FsplabError, ValueError):
    pass


class BadParams(FsplabError, ValueError):
    pass


class DimensionUnsupported(FsplabError):
    pass


class InsufficientSnapshots(FsplabError):
    pass


class CenterNotClean(FsplabError):
    pass


class RampActive(FsplabError):
    pass
