"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class UndefinedTransform(ValidationError):
    """A transform was requested where it does not exist (e.g. S with zero mean)."""


class NumericalBreakdown(ArithmeticError):
    """A numerical routine failed to produce a trustworthy answer."""


class NonConvergence(NumericalBreakdown):
    """An iterative method hit its iteration cap.

    Attributes
    ----------
    estimate : float
        Last iterate of the quantity being computed.
    gap : float
        Estimated relative spectral gap driving the convergence rate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, estimate=float("nan"), gap=float("nan"), iterations=0):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap
        self.iterations = iterations
