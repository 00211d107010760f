"""Exception hierarchy shared by every module."""


class PersistDDEError(Exception):
    """Base class for all package errors."""


class DomainError(PersistDDEError, ValueError):
    """Argument outside the domain of a function (negative or non-finite state, bad level)."""


class RangeError(PersistDDEError, ValueError):
    """Evaluation time outside the stored span of a trajectory or history."""


class BlowUpError(PersistDDEError, ArithmeticError):
    """A state component exceeded the configured magnitude cap."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class StepSizeError(PersistDDEError):
    """The step size underflowed the configured minimum."""


class PositivityError(PersistDDEError):
    """A cone model produced a state with a clearly negative component."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class BoundaryZeroError(PersistDDEError):
    """The vector field vanishes (numerically) on the boundary of the degree domain."""


class UnresolvedDegreeError(PersistDDEError):
    """Boundary refinement hit its cap before the winding angle criterion was met."""


class UnsupportedShapeError(PersistDDEError):
    """The annular region is not in the shape catalog or the dimension is unsupported."""


class ConfigError(PersistDDEError, ValueError):
    """Invalid run configuration."""
