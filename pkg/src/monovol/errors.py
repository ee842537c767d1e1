class MonovolError(Exception):
    pass


class DomainError(MonovolError, ValueError):
    """Argument outside the domain of an operation."""


class SingularStateError(MonovolError, ValueError):
    """State on (or numerically at) the boundary where a weight diverges."""


class NumericalError(MonovolError, ArithmeticError):
    """A numerical procedure produced an inconsistent result."""


class AccuracyError(NumericalError):
    """Quadrature did not reach the requested tolerance.

    ``estimate`` carries the best value obtained.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class IntegrandError(NumericalError):
    """An integrand returned a non-finite value; ``point`` is the offending input."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point
