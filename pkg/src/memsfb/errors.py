"""Exception hierarchy shared by all solvers."""


class MEMSError(Exception):
    """Base class for numerical failures raised by this package."""


class SingularGeometryError(MEMSError):
    """The deflection is too close to touchdown (min u <= -1 + guard)."""


class TouchdownError(SingularGeometryError):
    """A time step would carry the deflection past the touchdown threshold."""


class SolverBreakdownError(MEMSError):
    """A linear solve failed or returned a residual above tolerance."""


class ConvergenceError(MEMSError):
    """An iterative method (Newton, inverse power) did not converge."""


class ContinuationError(MEMSError):
    """The arclength corrector failed below the minimum step."""
