"""Exception hierarchy shared across countlab."""


class CountlabError(Exception):
    """Base class for every error raised by countlab."""


class DomainError(CountlabError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionMismatchError(DomainError):
    pass


class TotalMismatchError(DomainError):
    """A count vector does not sum to the total count parameter."""


class BoundaryDensityError(DomainError):
    """The density is unbounded at the requested point."""


class DegenerateDataError(DomainError):
    """Data cannot identify an interior estimate."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class QuadratureError(CountlabError, ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class SingularMatrixError(CountlabError, ArithmeticError):
    pass


class RejectionBudgetError(CountlabError, RuntimeError):
    """A rejection sampler ran out of attempts or would be impractical."""

    def __init__(self, message, acceptance):
        super().__init__(f"{message} (estimated acceptance={acceptance:.3e})")
        self.acceptance = acceptance


class ConfigError(CountlabError, ValueError):
    pass
