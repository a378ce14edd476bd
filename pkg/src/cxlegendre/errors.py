class LegendreError(Exception):
    """Base class for errors raised by this package."""


class DomainError(LegendreError, ValueError):
    pass


class PolarizationDomainError(DomainError):
    pass


class ConsistencyError(LegendreError, RuntimeError):
    """An internal numerical invariant (realness, Hermitian symmetry) broke."""


class DegeneratePotentialError(LegendreError):
    pass


class NeighborhoodViolation(LegendreError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ConcavityError(LegendreError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class AdmissibilityError(LegendreError):
    pass


class DiffeomorphismError(LegendreError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class BoundaryError(LegendreError):
    pass


class ConfigError(LegendreError):
    pass
