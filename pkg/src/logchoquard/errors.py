"""Exception types shared across the package."""


class LogChoquardError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(LogChoquardError):
    """Two fields (or a field and a kernel) live on incompatible grids."""


class NotProjectableError(LogChoquardError):
    """Nehari projection undefined: the quartic interaction term is not positive."""


class TailDecayError(LogChoquardError):
    """A radial profile does not decay below the tail tolerance at rmax."""


class LossOfPositivityError(LogChoquardError):
    """Ground-state iteration produced a sign-changing iterate."""


class NonConvergenceError(LogChoquardError):
    """An iterative solver stalled above its tolerance.

    Carries the residual/update history in ``trace`` for post-mortems.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ContractionFailureError(NonConvergenceError):
    """Fixed-point map for the correction failed to contract."""


class LinearSolveFailureError(NonConvergenceError):
    """Inner symmetric linear solve stagnated."""


class BoundaryMinimumError(LogChoquardError):
    """Reduced-energy minimizer fell on the boundary of the search grid."""


class DegenerateBasisError(LogChoquardError):
    """Projector basis is numerically degenerate (Gram determinant ~ 0)."""


class ResolutionError(LogChoquardError):
    """Grid too coarse to resolve the requested structure."""
