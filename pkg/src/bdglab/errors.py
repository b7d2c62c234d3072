"""Exception types shared across modules."""


class BdgLabError(Exception):
    pass


class DimensionError(BdgLabError, ValueError):
    pass


class InvariantError(BdgLabError):
    """A state invariant failed beyond its tolerance."""


class UndefinedMarginalError(BdgLabError):
    pass


class DivergenceError(BdgLabError):
    pass


class IntegrationFailure(BdgLabError):
    pass


class DomainTooSmallError(BdgLabError):
    """Mass reached the guard band at the edge of the momentum box."""


class TransformInconsistency(BdgLabError):
    pass


class InfeasibleQuantization(BdgLabError):
    pass


class SupportTooLarge(BdgLabError, ValueError):
    pass


class NonConvergence(BdgLabError):
    def __init__(self, msg, violation=None):
        super().__init__(msg)
        self.violation = violation


class InsufficientData(BdgLabError):
    pass


class ReportParseError(BdgLabError, ValueError):
    pass
