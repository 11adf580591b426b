"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the domain of a basis family or measure."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature hit its depth limit before reaching tolerance.

    Carries the best available estimate and a bound on its error so callers
    can decide whether the partial result is usable.
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound
