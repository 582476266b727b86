"""Exception types shared across the package."""


class FlatsymError(Exception):
    """Base class for all package-specific errors."""


class UndefinedAtOriginError(FlatsymError, ValueError):
    """Kernel quantity requested at the origin, where K is singular."""


class KernelNotHomeomorphismError(FlatsymError, ValueError):
    """The lift's derivative vanishes or changes sign: not a circle diffeomorphism."""


class InadmissibleKernelError(FlatsymError, ValueError):
    """Bi-Lipschitz defect exceeds the admissibility threshold."""


class EmptyBallError(FlatsymError, ValueError):
    """A ball query that was required to be non-empty returned no support points."""


class ResolutionExhaustedError(FlatsymError, ValueError):
    """Requested scale is below what the discretization pitch can resolve."""


class DegenerateCubeError(FlatsymError, ValueError):
    """Cube has too few members for the requested operation."""


class DegeneratePairError(FlatsymError, ValueError):
    """Two coincident points cannot span a line."""


class NoGoodPointsError(FlatsymError, ValueError):
    """Good-point filters stayed empty after all retries."""


class InvalidCutoffError(FlatsymError, ValueError):
    """Cutoff kind does not match what the functional requires."""


class WrongRegimeError(FlatsymError, ValueError):
    """Multiscale beta sum is in the other regime than the bound assumes."""


class ScaleOutOfRangeError(FlatsymError, ValueError):
    """Requested scale ladder exceeds the support's diameter."""


class MeasureFormatError(FlatsymError, ValueError):
    """Measure CSV file violates the x,y,w format."""
