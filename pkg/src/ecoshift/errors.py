"""Exception hierarchy shared by every ecoshift module."""


class EcoShiftError(Exception):
    """Base class for all errors raised by this package."""


class OffGridError(EcoShiftError, ValueError):
    """A cap pair does not lie on the cap grid."""


class UnknownRuntimeError(EcoShiftError, KeyError):
    """A runtime needed for a computation is missing from the surface."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown runtime"


class DowngradeForbiddenError(EcoShiftError, ValueError):
    """A target cap pair lowers a component below its baseline cap."""


class EmptyGridError(EcoShiftError, ValueError):
    """No grid point dominates the baseline cap pair."""


class DuplicateAppError(EcoShiftError, ValueError):
    """Two option tables (or applications) share one identifier."""


class TooLargeError(EcoShiftError):
    """Exhaustive enumeration would exceed the configured combination limit."""


class AppSetMismatchError(EcoShiftError, ValueError):
    """Two allocation results do not cover the same applications."""


class GridMismatchError(EcoShiftError, ValueError):
    """Surfaces that must share one cap grid do not."""


class InsufficientDataError(EcoShiftError, ValueError):
    """Not enough known runtimes to fit or predict."""


class InvalidParamsError(EcoShiftError, ValueError):
    """Synthetic-surface or scenario parameters violate their invariants."""


class InvariantViolation(EcoShiftError, AssertionError):
    """An internal post-condition did not hold."""
