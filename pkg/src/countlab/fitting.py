"""Maximum-likelihood fitting for the Poisson, negative binomial and
Dirichlet-multinomial families.

Positive parameters are optimized on the log scale.  Tolerances and caps:

* negative binomial: Newton on the profile score in ``ln alpha`` with
  ``mu`` fixed at the sample mean; stop when ``|score| <= 1e-10`` or after
  100 iterations.  Data with ``variance <= mean`` (population variance) have
  no interior optimum; the fit returns ``alpha = 1e8`` with a boundary status.
* Dirichlet-multinomial: Minka's fixed-point update, which never decreases
  the likelihood, followed by Newton polish in ``ln alpha`` with step
  halving; stop when the ``ln alpha`` step has infinity-norm ``<= 1e-8`` or
  after 500 iterations in total.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from countlab.dist_core import (
    DirMultParam,
    NegBinParam,
    PoissonParam,
    _count_array,
    dirmult_log_likelihood,
    negbin_from_mean,
    negbin_log_pmf,
    poisson_log_pmf,
)
from countlab.errors import DegenerateDataError, DomainError
from countlab.special_fn import digamma, log_gamma, trigamma

POISSON_RATE_FLOOR = 1e-12
NB_SCORE_TOL = 1e-10
NB_MAX_ITER = 100
NB_ALPHA_CAP = 1e8
DM_STEP_TOL = 1e-8
DM_MAX_ITER = 500
DM_SWITCH_TOL = 1e-5
DM_ALPHA0_CAP = 1e8
NEAR_MULTINOMIAL_ALPHA0 = 1e6
_LINE_SEARCH_MIN_STEP = 1e-6

CONVERGED = "converged"
BOUNDARY = "boundary"
MAX_ITER = "max_iterations"
DEGENERATE = "degenerate"


@dataclass
class FitResult:
    """Outcome of a fit.

    ``gradient_norm`` is the norm of the log-likelihood gradient with respect
    to the log-parameters at exit.  ``trace`` holds the log-likelihood after
    each iteration.
    """

    params: object
    log_likelihood: float
    iterations: int
    converged: bool
    gradient_norm: float
    status: str = CONVERGED
    flags: dict = field(default_factory=dict)
    standard_errors: Optional[dict] = None
    trace: list = field(default_factory=list)


def _univariate_data(data) -> np.ndarray:
    x = _count_array(np.asarray(data).ravel(), "data")
    if x.size == 0:
        raise DomainError("cannot fit an empty data set")
    return x


# ---------------------------------------------------------------------------
# Poisson
# ---------------------------------------------------------------------------


def fit_poisson(data) -> FitResult:
    x = _univariate_data(data)
    mean = float(x.mean())
    degenerate = mean == 0.0
    lam = max(mean, POISSON_RATE_FLOOR)
    param = PoissonParam(lam)
    loglik = float(np.sum(poisson_log_pmf(param, x)))
    grad = abs(lam * (x.sum() / lam - x.size))
    return FitResult(
        params=param,
        log_likelihood=loglik,
        iterations=0,
        converged=True,
        gradient_norm=float(grad),
        status=DEGENERATE if degenerate else CONVERGED,
        flags={"degenerate": degenerate},
        standard_errors={"lambda": math.sqrt(lam / x.size)},
    )


# ---------------------------------------------------------------------------
# Negative binomial
# ---------------------------------------------------------------------------


def negbin_alpha_from_moments(mean: float, variance: float) -> float:
    """Method-of-moments shape from ``variance = mean + mean^2 / alpha``."""
    if not mean > 0.0 or not variance > mean:
        raise DegenerateDataError(
            f"method of moments needs variance > mean > 0, got mean={mean!r}, variance={variance!r}"
        )
    return mean * mean / (variance - mean)


def moments_init_negbin(data) -> NegBinParam:
    x = _univariate_data(data)
    mean = float(x.mean())
    variance = float(x.var())
    return negbin_from_mean(negbin_alpha_from_moments(mean, variance), mean)


class _NegBinProfile:
    """Profile log-likelihood in ``alpha`` with ``mu`` at the sample mean."""

    def __init__(self, x: np.ndarray):
        values, counts = np.unique(x, return_counts=True)
        self.values = values
        self.counts = counts.astype(float)
        self.n = float(x.size)
        self.mu = float(x.mean())
        self._const = -float(np.dot(self.counts, log_gamma(values + 1.0)))

    def loglik(self, alpha: float) -> float:
        a, mu, n = alpha, self.mu, self.n
        lg = np.dot(self.counts, log_gamma(self.values + a)) - n * log_gamma(a)
        return float(
            lg + self._const + n * mu * math.log(mu / (mu + a)) + n * a * math.log(a / (mu + a))
        )

    def score(self, alpha: float) -> float:
        """d loglik / d alpha."""
        a, mu, n = alpha, self.mu, self.n
        return float(
            np.dot(self.counts, digamma(self.values + a)) - n * digamma(a)
            + n * math.log(a / (mu + a))
        )

    def curvature(self, alpha: float) -> float:
        """d^2 loglik / d alpha^2."""
        a, mu, n = alpha, self.mu, self.n
        return float(
            np.dot(self.counts, trigamma(self.values + a)) - n * trigamma(a)
            + n * (1.0 / a - 1.0 / (mu + a))
        )


def fit_negbin(data) -> FitResult:
    """Maximum-likelihood negative binomial fit.

    Returns a boundary result (``alpha = NB_ALPHA_CAP``, ``converged=False``)
    when the data are not over-dispersed.
    """
    x = _univariate_data(data)
    if x.size < 2:
        raise DomainError("negative binomial fitting needs at least two observations")
    mean = float(x.mean())
    variance = float(x.var())
    if mean == 0.0 or variance <= mean:
        mu = max(mean, POISSON_RATE_FLOOR)
        param = negbin_from_mean(NB_ALPHA_CAP, mu)
        loglik = float(np.sum(negbin_log_pmf(param, x)))
        return FitResult(
            params=param,
            log_likelihood=loglik,
            iterations=0,
            converged=False,
            gradient_norm=math.nan,
            status=BOUNDARY,
            flags={"boundary": True, "under_dispersed": True},
        )

    profile = _NegBinProfile(x)
    eta = math.log(negbin_alpha_from_moments(mean, variance))
    alpha = math.exp(eta)
    loglik = profile.loglik(alpha)
    trace = [loglik]
    grad = alpha * profile.score(alpha)
    iterations = 0
    while abs(grad) > NB_SCORE_TOL and iterations < NB_MAX_ITER:
        iterations += 1
        hess = grad + alpha * alpha * profile.curvature(alpha)  # d^2 loglik / d eta^2
        step = -grad / hess if hess < 0.0 else math.copysign(1.0, grad)
        step = max(-5.0, min(5.0, step))
        # tiny Newton steps change loglik below its rounding, so only
        # macroscopic steps are backtracked
        while abs(step) > _LINE_SEARCH_MIN_STEP:
            cand = math.exp(eta + step)
            if cand < NB_ALPHA_CAP and profile.loglik(cand) >= loglik:
                break
            step *= 0.5
        eta += step
        alpha = math.exp(eta)
        loglik = profile.loglik(alpha)
        trace.append(loglik)
        grad = alpha * profile.score(alpha)
    status = CONVERGED if abs(grad) <= NB_SCORE_TOL else MAX_ITER

    param = negbin_from_mean(alpha, profile.mu)
    info = -profile.curvature(alpha)
    se = {"alpha": 1.0 / math.sqrt(info) if info > 0.0 else math.inf,
          "mu": math.sqrt((profile.mu + profile.mu**2 / alpha) / profile.n)}
    return FitResult(
        params=param,
        log_likelihood=float(np.sum(negbin_log_pmf(param, x))),
        iterations=iterations,
        converged=status == CONVERGED,
        gradient_norm=abs(grad),
        status=status,
        flags={"boundary": False},
        standard_errors=se,
        trace=trace,
    )


def negbin_profile_score(data, alpha: float) -> float:
    """d loglik / d ln(alpha) of the profile likelihood at ``alpha``."""
    return alpha * _NegBinProfile(_univariate_data(data)).score(alpha)


def negbin_profile_loglik(data, alpha: float) -> float:
    return _NegBinProfile(_univariate_data(data)).loglik(alpha)


# ---------------------------------------------------------------------------
# Dirichlet-multinomial
# ---------------------------------------------------------------------------


def _dirmult_rows(data) -> np.ndarray:
    rows = np.asarray([list(getattr(r, "counts", r)) for r in data], dtype=object)
    if rows.ndim != 2:
        raise DomainError("rows must share a common dimension")
    x = _count_array(rows.astype(float), "data")
    if x.shape[0] < 2:
        raise DomainError("Dirichlet-multinomial fitting needs at least two rows")
    if x.shape[1] < 2:
        raise DomainError("Dirichlet-multinomial fitting needs at least two categories")
    empty = np.flatnonzero(x.sum(axis=0) == 0)
    if empty.size:
        raise DegenerateDataError(
            f"category {int(empty[0])} is zero in every row", index=int(empty[0])
        )
    if np.all(x.sum(axis=1) == 0):
        raise DegenerateDataError("every row has total zero")
    return x


def dirmult_gradient(alphas, x) -> np.ndarray:
    """d loglik / d alpha_k summed over rows."""
    a = np.asarray(alphas, dtype=float)
    m = x.sum(axis=1)
    a0 = a.sum()
    common = np.sum(digamma(a0) - digamma(a0 + m))
    return common + np.sum(digamma(x + a) - digamma(a), axis=0)


def _dirmult_hessian(a, x):
    """Hessian as ``diag(q) + z * ones``."""
    m = x.sum(axis=1)
    a0 = a.sum()
    z = np.sum(trigamma(a0) - trigamma(a0 + m))
    q = np.sum(trigamma(x + a) - trigamma(a), axis=0)
    return q, z


def _fixed_point_step(a, x):
    m = x.sum(axis=1)
    a0 = a.sum()
    num = np.sum(digamma(x + a) - digamma(a), axis=0)
    den = np.sum(digamma(a0 + m) - digamma(a0))
    return a * num / den


def _moments_start(x) -> np.ndarray:
    m = x.sum(axis=1)
    p = x.sum(axis=0) / m.sum()
    keep = m > 0
    props = x[keep] / m[keep, None]
    mbar = float(m[keep].mean())
    var = props.var(axis=0)
    ratio = var / np.maximum(p * (1.0 - p), 1e-300)
    # E[var(p_hat)] = p(1-p) (m + a0) / (m (1 + a0)) for a common total m
    r = float(np.median(ratio)) * mbar
    if mbar > 1.0 and 1.0 < r < mbar:
        a0 = (mbar - r) / (r - 1.0)
    else:
        a0 = 1.0
    return np.maximum(p * a0, 1e-3)


def fit_dirmult(data, max_iter: int = DM_MAX_ITER) -> FitResult:
    """Maximum-likelihood Dirichlet-multinomial concentrations.

    ``data`` is a sequence of count vectors sharing a dimension; each row may
    have its own total.  A fit whose ``alpha0`` exceeds
    ``NEAR_MULTINOMIAL_ALPHA0`` is flagged ``near_multinomial``.
    """
    x = _dirmult_rows(data)
    a = _moments_start(x)
    loglik = dirmult_log_likelihood(a, x)
    trace = [loglik]
    status = MAX_ITER
    iterations = 0
    phase = "fixed_point"
    fixed_point_iterations = 0
    while iterations < max_iter:
        iterations += 1
        if phase == "fixed_point":
            new = _fixed_point_step(a, x)
            fixed_point_iterations += 1
            log_step = np.max(np.abs(np.log(new) - np.log(a)))
            if log_step <= DM_SWITCH_TOL:
                phase = "newton"
        else:
            new = _newton_step(a, x, loglik)
            log_step = np.max(np.abs(np.log(new) - np.log(a)))
        a = new
        loglik = dirmult_log_likelihood(a, x)
        trace.append(loglik)
        if a.sum() >= DM_ALPHA0_CAP:
            status = BOUNDARY
            break
        if phase == "newton" and log_step <= DM_STEP_TOL:
            status = CONVERGED
            break
        if phase == "fixed_point" and iterations >= max_iter // 2:
            phase = "newton"

    grad = a * dirmult_gradient(a, x)
    totals = np.unique(x.sum(axis=1))
    return FitResult(
        params=DirMultParam(int(totals[0]) if totals.size == 1 else 0, tuple(a.tolist())),
        log_likelihood=loglik,
        iterations=iterations,
        converged=status == CONVERGED,
        gradient_norm=float(np.linalg.norm(grad)),
        status=status,
        flags={
            "near_multinomial": bool(a.sum() >= NEAR_MULTINOMIAL_ALPHA0),
            "fixed_point_iterations": fixed_point_iterations,
            "row_totals_vary": bool(totals.size > 1),
        },
        standard_errors=_dirmult_standard_errors(a, x),
        trace=trace,
    )


def _newton_step(a, x, loglik):
    """One safeguarded Newton step in ``eta = ln alpha``.

    Falls back to the fixed-point update whenever Newton fails to increase
    the likelihood, so every accepted step is an ascent step.
    """
    g = dirmult_gradient(a, x)
    q, z = _dirmult_hessian(a, x)
    grad_eta = a * g
    hess_eta = np.diag(a * a * q + a * g) + z * np.outer(a, a)
    try:
        step = -np.linalg.solve(hess_eta, grad_eta)
    except np.linalg.LinAlgError:
        step = None
    if step is not None and np.all(np.isfinite(step)) and np.dot(step, grad_eta) > 0.0:
        step = np.clip(step, -5.0, 5.0)
        if np.max(np.abs(step)) <= _LINE_SEARCH_MIN_STEP:
            return a * np.exp(step)
        for _ in range(60):
            cand = a * np.exp(step)
            if dirmult_log_likelihood(cand, x) >= loglik:
                return cand
            step = 0.5 * step
    return _fixed_point_step(a, x)


def _dirmult_standard_errors(a, x):
    q, z = _dirmult_hessian(a, x)
    # inverse of -(diag(q) + z 11^T) by Sherman-Morrison
    d = -q
    if np.any(d <= 0.0):
        return None
    inv_d = 1.0 / d
    denom = 1.0 - z * np.sum(inv_d)
    if denom == 0.0:
        return None
    cov_diag = inv_d + z * inv_d**2 / denom
    if np.any(cov_diag <= 0.0):
        return None
    return {"alphas": tuple(np.sqrt(cov_diag).tolist())}


def dirmult_loglik(alphas: Sequence[float], data) -> float:
    return dirmult_log_likelihood(alphas, _dirmult_rows(data))


def dirmult_score(alphas: Sequence[float], data) -> np.ndarray:
    """Gradient of the log-likelihood with respect to ``ln alpha``."""
    a = np.asarray(alphas, dtype=float)
    return a * dirmult_gradient(a, _dirmult_rows(data))
