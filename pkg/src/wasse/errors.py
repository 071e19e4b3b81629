"""Exception hierarchy shared by all wasse modules."""


class WasseError(Exception):
    """Base class for every error raised by this package."""


# case files
class MalformedSection(WasseError, ValueError):
    pass


class DanglingBranch(WasseError, ValueError):
    pass


class NonPositiveBase(WasseError, ValueError):
    pass


class UnsupportedFeature(WasseError, ValueError):
    """The case file uses a feature outside the supported subset (e.g. taps)."""


class NoSuchBranch(WasseError, KeyError):
    pass


# partitioning
class UnassignedBus(WasseError, ValueError):
    pass


class EmptyRegion(WasseError, ValueError):
    pass


class NoSuchRegion(WasseError, KeyError):
    pass


# numerics
class DimensionMismatch(WasseError, ValueError):
    pass


class NotPositiveDefinite(WasseError, ValueError):
    pass


class CholeskyFailure(WasseError, ArithmeticError):
    pass


class DegenerateSpread(WasseError, ValueError):
    pass


class DofUnderflow(WasseError, ArithmeticError):
    pass


class SingularInnovation(WasseError, ArithmeticError):
    pass


class SingularFusedInformation(WasseError, ArithmeticError):
    pass


class FilterStepError(WasseError):
    """Wraps a numeric failure with the region/step it happened in."""

    def __init__(self, message, region=None, step=None, channel=None):
        super().__init__(message)
        self.region = region
        self.step = step
        self.channel = channel


# harness
class ScenarioError(WasseError, ValueError):
    pass


class ExperimentFailed(WasseError, RuntimeError):
    pass
