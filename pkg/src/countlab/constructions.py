"""Constructive evaluations of the count-distribution identities.

Each function computes a density from its *construction* rather than its
closed form, so that comparing the two turns an identity into a numerical
check:

* negative binomial as a Poisson mixed over a gamma rate (quadrature);
* multinomial as independent Poissons conditioned on their total;
* Dirichlet-multinomial as independent negative binomials with a shared
  ``theta`` conditioned on their total;
* Dirichlet as normalized independent gammas, through the change of
  variables ``x_i = y z_i`` whose Jacobian determinant is computed by LU
  factorization, and the radial variable ``y`` integrated out by quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from countlab.dist_core import (
    CountVector,
    GammaParam,
    NegBinParam,
    PoissonParam,
    SimplexVector,
    _concentrations,
    negbin_log_pmf,
    poisson_log_pmf,
)
from countlab.errors import DimensionMismatchError, DomainError, SingularMatrixError
from countlab.quadrature import integrate
from countlab.special_fn import log_gamma

QUAD_REL_TOL = 1e-10
_N_PROBES = 64


@dataclass(frozen=True)
class EquivalenceResult:
    """Outcome of comparing the two sides of an identity in log space."""

    lhs_log_value: float
    rhs_log_value: float
    abs_diff: float
    tolerance: float
    passed: bool

    @classmethod
    def compare(cls, lhs: float, rhs: float, tolerance: float) -> "EquivalenceResult":
        if lhs == rhs:
            diff = 0.0
        else:
            diff = abs(lhs - rhs)
            if math.isnan(diff):
                diff = math.inf
        return cls(float(lhs), float(rhs), diff, float(tolerance), diff <= tolerance)


# ---------------------------------------------------------------------------
# Quadrature on (0, inf) in log space
# ---------------------------------------------------------------------------


def _log_integral_gamma_shaped(log_f, k: float, c: float, rel_tol=QUAD_REL_TOL) -> float:
    """``ln`` of the integral of ``exp(log_f(ln u))`` over ``u in (0, inf)``.

    For integrands shaped like ``u**(k - 1) * exp(-c u)``.  Substituting
    ``rho = ln u`` gives a unimodal integrand ``exp(log_f(rho) + rho)`` with
    mode ``ln(k / c)`` and curvature ``k`` there.  Each side of the mode is
    mapped to ``(0, 1)`` by ``rho = mode +/- w t / (1 - t)`` with ``w`` the
    width of that side: ``1/sqrt(k)``, or ``1/k`` on the slowly decaying
    left side when ``k < 1``.  Values are exponentiated after subtracting
    their maximum over a probe grid, so nothing under- or overflows.
    """
    mode = math.log(k / c)
    w_right = 1.0 / math.sqrt(k)
    w_left = max(w_right, 1.0 / k)

    def side(sign, w):
        log_w = math.log(w)

        def log_g(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                rho = mode + sign * w * t / (1.0 - t)
                vals = log_f(rho) + rho + log_w - 2.0 * np.log1p(-t)
            return np.where(np.isnan(vals), -np.inf, vals)

        return log_g

    sides = (side(-1.0, w_left), side(1.0, w_right))
    probes = (np.arange(_N_PROBES) + 0.5) / _N_PROBES
    shift = max(float(np.max(g(probes))) for g in sides)
    if not math.isfinite(shift):
        raise DomainError("integrand vanishes on the whole probe grid")
    total = 0.0
    for g in sides:
        total += integrate(lambda t, g=g: np.exp(g(t) - shift), 0.0, 1.0, rel_tol=rel_tol).value
    return shift + math.log(total)


def negbin_via_poisson_gamma_log(alpha: float, mu: float, x: int, rel_tol=QUAD_REL_TOL) -> float:
    """ln of the Poisson pmf integrated against a Gamma(alpha, mean mu) rate."""
    gamma = GammaParam.from_mean(alpha, mu)
    poisson_log_pmf(PoissonParam(1.0), x)  # validates x
    x = float(x)
    a, b = gamma.alpha, gamma.beta
    const = a * math.log(b) - log_gamma(a) - log_gamma(x + 1.0)

    def log_f(log_lam):
        # Poisson(x | lam) * Gamma(lam | a, b), written in ln(lam)
        return const + (x + a - 1.0) * log_lam - (1.0 + b) * np.exp(log_lam)

    return _log_integral_gamma_shaped(log_f, x + a, 1.0 + b, rel_tol)


def negbin_via_poisson_gamma(alpha: float, mu: float, x: int, rel_tol=QUAD_REL_TOL) -> float:
    """Poisson-gamma marginal probability of ``x`` computed by quadrature.

    Raises ``QuadratureError`` (carrying the achieved estimate and error) if
    the adaptive rule does not converge.
    """
    return math.exp(negbin_via_poisson_gamma_log(alpha, mu, x, rel_tol))


def _as_counts(x) -> CountVector:
    return x if isinstance(x, CountVector) else CountVector(tuple(x))


def multinomial_via_conditioned_poissons(lambdas: Sequence[float], x) -> float:
    """ln P(X = x | sum X = M) for independent ``X_i ~ Poisson(lambda_i)``."""
    lam = _concentrations(lambdas, "lambdas")
    x = _as_counts(x)
    if len(x) != len(lam):
        raise DimensionMismatchError(f"{len(x)} counts for {len(lam)} rates")
    joint = math.fsum(poisson_log_pmf(PoissonParam(l), xi) for l, xi in zip(lam, x))
    marginal = poisson_log_pmf(PoissonParam(math.fsum(lam)), x.total)
    return joint - marginal


def dirmult_via_conditioned_negbins(alphas: Sequence[float], theta: float, x) -> float:
    """ln P(X = x | sum X = M) for independent ``X_i ~ NB(alpha_i, theta)``."""
    a = _concentrations(alphas)
    x = _as_counts(x)
    if len(x) != len(a):
        raise DimensionMismatchError(f"{len(x)} counts for {len(a)} shapes")
    joint = math.fsum(negbin_log_pmf(NegBinParam(ai, theta), xi) for ai, xi in zip(a, x))
    marginal = negbin_log_pmf(NegBinParam(math.fsum(a), theta), x.total)
    return joint - marginal


def conditioned_negbins_heterogeneous(alphas, thetas, x) -> float:
    """Conditional log-pmf of independent ``NB(alpha_i, theta_i)`` given their sum.

    With unequal ``theta_i`` the total has no closed form, so its pmf at
    ``M`` is obtained by exact convolution of the component pmfs.
    """
    a = _concentrations(alphas)
    x = _as_counts(x)
    if not (len(a) == len(thetas) == len(x)):
        raise DimensionMismatchError("alphas, thetas and counts must have equal length")
    m = x.total
    support = np.arange(m + 1)
    joint = 0.0
    conv = np.array([1.0])
    for ai, ti, xi in zip(a, thetas, x):
        param = NegBinParam(ai, ti)
        joint += negbin_log_pmf(param, xi)
        conv = np.convolve(conv, np.exp(negbin_log_pmf(param, support)))[: m + 1]
    return joint - math.log(conv[m])


# ---------------------------------------------------------------------------
# Change of variables z, y -> x
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JacobianMatrix:
    """Derivatives of ``x_i = y z_i`` (i <= n), ``x_{n+1} = y (1 - sum z)``.

    Rows index ``x_1..x_{n+1}``; columns index ``z_1..z_n`` then ``y``.
    """

    n: int
    y: float
    z: tuple
    entries: np.ndarray


def build_jacobian(z: Sequence[float], y: float) -> JacobianMatrix:
    """Jacobian of the inverse map from ``(z_1..z_n, y)`` to independent gammas."""
    if isinstance(z, SimplexVector):
        z = z.free
    z_arr = np.asarray(z, dtype=float)
    if z_arr.ndim != 1 or z_arr.size < 1:
        raise DomainError("z must be a non-empty vector of free simplex coordinates")
    y = float(y)
    if not (math.isfinite(y) and y > 0.0):
        raise DomainError(f"y must be finite and > 0, got {y!r}")
    rest = 1.0 - math.fsum(z_arr)
    if np.any(z_arr <= 0.0) or rest <= 0.0:
        raise DomainError("z must lie in the open simplex interior")
    n = z_arr.size
    a = np.zeros((n + 1, n + 1))
    a[np.arange(n), np.arange(n)] = y
    a[:n, n] = z_arr
    a[n, :n] = -y
    a[n, n] = rest
    a.setflags(write=False)
    return JacobianMatrix(n, y, tuple(z_arr.tolist()), a)


def jacobian_determinant(j: JacobianMatrix) -> float:
    """Determinant by LU factorization with partial pivoting."""
    lu, piv = scipy.linalg.lu_factor(np.array(j.entries), check_finite=True)
    diag = np.diag(lu)
    if np.any(diag == 0.0):
        raise SingularMatrixError("zero pivot in LU factorization of the Jacobian")
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    sign = -1.0 if swaps % 2 else 1.0
    return sign * float(np.prod(diag))


def dirichlet_density_via_gamma_construction(alphas, z, beta: float = 1.0,
                                             rel_tol=QUAD_REL_TOL) -> float:
    """Dirichlet log-density at ``z`` from independent ``Gamma(alpha_i, beta)``.

    Integrates the joint density of the gammas evaluated at ``x = y z``,
    times the Jacobian determinant ``y^n``, over ``y in (0, inf)``.
    """
    a = np.array(_concentrations(alphas))
    if not isinstance(z, SimplexVector):
        z = SimplexVector(tuple(z))
    zs = z.array
    if zs.size != a.size:
        raise DimensionMismatchError(f"simplex point has {zs.size} coordinates, expected {a.size}")
    if np.any(zs <= 0.0):
        raise DomainError("the gamma construction needs an interior simplex point")
    beta = float(beta)
    if not (math.isfinite(beta) and beta > 0.0):
        raise DomainError(f"beta must be finite and > 0, got {beta!r}")
    n = a.size - 1
    log_norm = a * math.log(beta) - log_gamma(a)
    log_z = np.log(zs)

    def log_f(log_y):
        log_y = np.asarray(log_y, dtype=float)[:, None]
        y = np.exp(log_y)
        # prod_i Gamma(y z_i | a_i, beta), times the Jacobian determinant y^n
        joint = np.sum(log_norm + (a - 1.0) * (log_y + log_z) - beta * y * zs, axis=1)
        return joint + n * log_y[:, 0]

    # in y the integrand is y^(a0 - 1) exp(-beta y) times constants
    return _log_integral_gamma_shaped(log_f, float(a.sum()), beta, rel_tol)


__all__ = [
    "EquivalenceResult",
    "JacobianMatrix",
    "build_jacobian",
    "conditioned_negbins_heterogeneous",
    "dirichlet_density_via_gamma_construction",
    "dirmult_via_conditioned_negbins",
    "jacobian_determinant",
    "multinomial_via_conditioned_poissons",
    "negbin_via_poisson_gamma",
    "negbin_via_poisson_gamma_log",
]
