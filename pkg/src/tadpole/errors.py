"""Exception hierarchy shared by all tadpole modules."""


class TadpoleError(Exception):
    """Base class for every error raised by this package."""


class InvalidGeometry(TadpoleError, ValueError):
    pass


class NonCommensurateTail(InvalidGeometry):
    pass


class DomainError(TadpoleError, ValueError):
    pass


class NoRoot(TadpoleError):
    pass


class NoAmplitude(TadpoleError):
    pass


class NoShift(TadpoleError):
    pass


class NoBracket(TadpoleError):
    pass


class OutOfRange(TadpoleError):
    pass


class NewtonDiverged(TadpoleError):
    def __init__(self, message, residual_norm=None, iterations=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularJacobian(NewtonDiverged):
    pass


class BranchCollapsed(NewtonDiverged):
    """Newton converged, but onto the trivial state instead of the seeded branch."""


class ContinuationStalled(TadpoleError):
    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


class NonSymmetrizable(TadpoleError):
    pass


class GridTooCoarse(TadpoleError):
    pass


class QRNoConvergence(TadpoleError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SectorMismatch(TadpoleError):
    pass


class NotImaginary(TadpoleError):
    pass


class ConfigError(TadpoleError, ValueError):
    pass
