"""Exception hierarchy shared by all lab modules."""


class LabError(Exception):
    """Base class for every error raised by neumannlab."""


class ConfigError(LabError):
    pass


class OutsideTube(LabError):
    """A boundary quantity was requested too far from the boundary."""


class AmbiguousProjection(LabError):
    """The closest point on the closure is not unique."""


class LeftTube(LabError):
    """A Skorokhod predictor left the projection tube (time step too large)."""


class Infeasible(LabError):
    """A point that must lie in the closed domain does not."""


class NoConvergence(LabError):
    pass


class NewtonFailure(NoConvergence):
    pass


class RegimeChatter(LabError):
    pass


class DomainError(LabError, ValueError):
    pass


class InsufficientData(LabError):
    pass


class EmptyContour(LabError):
    pass
