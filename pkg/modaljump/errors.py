"""
Exception hierarchy for the modal jump simulator.

Every error derives from ModalJumpError and from the builtin it refines, so
callers that already catch ValueError / IndexError keep working.
"""


class ModalJumpError(Exception):
    """Base class for all simulator errors"""


class DimensionOverflowError(ModalJumpError, ValueError):
    """Composite Hilbert space larger than the configured limit"""

    def __init__(self, dim, limit):
        self.dim = dim
        self.limit = limit
        super().__init__(f"Hilbert space dimension {dim} exceeds limit {limit} (MODALJUMP_MAX_DIM)")


class ModeIndexError(ModalJumpError, IndexError):
    """Mode or temporal-mode index outside 1..num_modes"""


class ParameterMismatchError(ModalJumpError, ValueError):
    """Model parameters inconsistent with the space, basis or approximation"""


class NumericalError(ModalJumpError, ArithmeticError):
    """Non-finite amplitudes produced by the integrator"""

    def __init__(self, message, t=None):
        self.t = t
        if t is not None:
            message = f"{message} (t={t!r})"
        super().__init__(message)


class StepSizeError(ModalJumpError, ValueError):
    """Total jump probability in one step exceeds 1"""

    def __init__(self, t, p):
        self.t = t
        self.p = p
        super().__init__(f"jump probability {p:.6g} > 1 at t={t!r}; reduce dt")


class DegenerateSliceError(ModalJumpError, ZeroDivisionError):
    """Conditioned state requested for a zero-probability configuration"""


class GridMismatchError(ModalJumpError, ValueError):
    """Time grids disagree, or a probe time lies outside the grid"""


class SnapshotCacheError(ModalJumpError, OSError):
    """Guiding snapshot cache unreadable or written for another run"""


class ConfigError(ModalJumpError, ValueError):
    """Invalid run configuration, reported with file and line when known"""

    def __init__(self, message, path=None, line=None):
        self.message = message
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")
