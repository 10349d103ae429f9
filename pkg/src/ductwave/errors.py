"""Exception types raised across the package."""


class DuctwaveError(Exception):
    """Base class for all package errors."""


class DomainError(DuctwaveError, ValueError):
    """An argument lies outside the interval where the operation is defined."""


class ProfileError(DuctwaveError, ValueError):
    """A velocity profile fails the admissibility checks."""


class UnsupportedProfileError(DuctwaveError, TypeError):
    """The operation is not available for this profile class."""


class CutEvaluationError(DuctwaveError, ValueError):
    """An off-cut evaluator was called on the cut; use the boundary values instead."""


class AtPoleError(DuctwaveError, ZeroDivisionError):
    """The norming factor is evaluated at (or numerically on top of) one of its poles."""


class EndpointError(DuctwaveError, ValueError):
    """A principal-value point coincides with an interval endpoint."""


class SingularCutError(DuctwaveError, ArithmeticError):
    """The boundary value of 2 - F vanishes on the cut."""


class SpectrumIncompleteError(DuctwaveError, RuntimeError):
    """An exterior pole is missing."""


class DegenerateRootError(DuctwaveError, ArithmeticError):
    """A root of F = 2 collides with a breakpoint value or is not simple."""


class PoleCollisionError(DuctwaveError, ArithmeticError):
    """A local velocity coincides with an interior pole."""


class ResolutionError(DuctwaveError, RuntimeError):
    """A quadrature or time grid is too coarse for the requested accuracy."""


class InstabilityError(DuctwaveError, RuntimeError):
    """The profile is not certified stable, so the quasi-explicit solution is refused."""

    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = tuple(roots)


class UnsupportedDecompositionError(DuctwaveError, ValueError):
    """The transport decomposition needs vanishing initial velocity."""


class ContractError(DuctwaveError, ValueError):
    """Array shapes or grids passed between modules do not match."""


class StepSizeError(DuctwaveError, ValueError):
    """A time step exceeds the stability bound of the explicit scheme."""

    def __init__(self, message, bound):
        super().__init__(message)
        self.bound = bound
