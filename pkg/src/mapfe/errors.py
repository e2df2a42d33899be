"""Exception types raised across the solver."""


class MapfeError(Exception):
    pass


class SingularTensor(MapfeError):
    pass


class NonPositiveJacobian(MapfeError):
    pass


class GentLockingLimit(MapfeError):
    """Raised when the Gent argument reaches the locking guard; callers cut the step."""


class ZeroCurvature(MapfeError):
    pass


class OutOfRange(MapfeError):
    pass


class UnsupportedDegree(MapfeError):
    pass


class UnsupportedRule(MapfeError):
    pass


class SingularSystem(MapfeError):
    def __init__(self, message, pivot=None, dof=None):
        super().__init__(message)
        self.pivot = pivot
        self.dof = dof


class DivergedNonlinear(MapfeError):
    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class LockingStretch(MapfeError):
    pass
