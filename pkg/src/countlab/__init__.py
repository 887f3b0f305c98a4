"""countlab: Poisson, gamma, negative binomial, Dirichlet, multinomial and
Dirichlet-multinomial distributions, with samplers, fitters and a suite
that checks the constructions linking them."""
from countlab.dist_core import (
    CountVector,
    DirichletParam,
    DirMultParam,
    GammaParam,
    MultinomialParam,
    NegBinParam,
    PoissonParam,
    SimplexVector,
    dirichlet_log_pdf,
    dirmult_log_pmf,
    gamma_log_pdf,
    moments,
    multinomial_log_pmf,
    negbin_from_mean,
    negbin_log_pmf,
    poisson_log_pmf,
)
from countlab.errors import (
    ConfigError,
    CountlabError,
    DomainError,
    QuadratureError,
    RejectionBudgetError,
    SingularMatrixError,
)
from countlab.samplers import RngStream

__version__ = "0.1.0"
