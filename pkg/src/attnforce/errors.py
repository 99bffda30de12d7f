"""Exception hierarchy shared by every module in the package."""


class AttnForceError(ValueError):
    """Base class for all package errors."""


class ZeroMass(AttnForceError):
    pass


class EmptyMask(AttnForceError):
    pass


class ShapeMismatch(AttnForceError):
    pass


class LayoutMismatch(AttnForceError):
    pass


class DegenerateBox(AttnForceError):
    pass


class SingularTransform(AttnForceError):
    pass


class WarpFailure(AttnForceError):
    """Raised when a displaced map cannot be brought back inside the canvas."""


class DivisionDomain(AttnForceError):
    pass


class ParseError(AttnForceError):
    pass


class InvariantError(AttnForceError):
    pass
