"""Exception hierarchy shared by all solver modules."""


class DualSolverError(Exception):
    """Base class for solver failures."""


class NonConvexInner(DualSolverError):
    """The pointwise dual-to-primal problem lost strict convexity.

    ``min_eig`` carries the offending smallest Hessian eigenvalue when known.
    """

    def __init__(self, message, min_eig=None, location=None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.min_eig = min_eig
        self.location = location


class MaxIterations(DualSolverError):
    """An iterative solve ran out of iterations."""

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


MaxInnerIterations = MaxIterations


class MaxOuterIterations(MaxIterations):
    pass


class Stagnation(DualSolverError):
    """Dual gradient norm plateaued above tolerance."""


class DtPFailure(DualSolverError):
    pass


class MPDLoss(DualSolverError):
    """The matrix M of the implicit DtP map is no longer positive definite."""

    def __init__(self, message, min_eig=None):
        super().__init__(message)
        self.min_eig = min_eig


class InadmissibleState(DualSolverError):
    """Singular F or P, or non-positive slip strength."""


class NotAugmentationRow(DualSolverError):
    pass


class SchemaError(DualSolverError):
    """Problem file failed validation; ``path`` names the offending key."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
