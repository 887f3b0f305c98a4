"""Seeded random variate generation for every family.

Uniform and normal deviates come from a Philox counter-based generator keyed
by ``(seed, stream_id)``; the distribution-specific algorithms are
implemented here:

* gamma: Marsaglia-Tsang squeeze, with ``G(a) = G(a + 1) U^(1/a)`` for
  ``a < 1`` carried out in log space;
* Poisson: sequential-search inversion for ``lambda < 10``, Hormann's PTRS
  transformed rejection for ``lambda >= 10``;
* negative binomial: Poisson with a gamma-distributed rate;
* Dirichlet: normalized independent gammas;
* multinomial: sequential conditional binomials;
* Dirichlet-multinomial: multinomial with a Dirichlet-distributed
  probability vector.

The ``*_by_conditioning`` samplers draw independent Poisson or negative
binomial vectors and keep those whose total equals ``m``.  They are slow
oracles for testing the composition samplers, not production paths.

Every sampler takes an optional ``size``.  Without it a single draw is
returned (a float, an int, a ``SimplexVector`` or a ``CountVector``); with
it an ndarray of ``size`` draws (rows for vector families).
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from countlab.dist_core import (
    CountVector,
    DirichletParam,
    DirMultParam,
    GammaParam,
    MultinomialParam,
    NegBinParam,
    PoissonParam,
    SimplexVector,
    _check_count,
    _concentrations,
    negbin_log_pmf,
    poisson_log_pmf,
)
from countlab.errors import DomainError, RejectionBudgetError
from countlab.special_fn import log_gamma

POISSON_INVERSION_MAX = 10.0
MIN_ACCEPTANCE = 1e-4
MAX_ATTEMPTS = 10**6
_MAX_BATCH = 1 << 18
_INVERSION_CAP = 400


class RngStream:
    """Deterministic random stream identified by ``(seed, stream_id)``.

    The Philox key is the pair itself and the counter starts at zero, so a
    stream can be recreated anywhere from its identifiers.  A stream holds
    mutable state and must not be shared between concurrent tasks; use
    :meth:`derive` to give each task its own stream.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0):
        for name, value in (("seed", seed), ("stream_id", stream_id)):
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) < 2**64:
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {value!r}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self._gen = np.random.Generator(self._bitgen)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    @property
    def counter(self) -> tuple:
        state = self._bitgen.state
        return tuple(int(c) for c in state["state"]["counter"]) + (int(state["buffer_pos"]),)

    def derive(self, stream_id: int) -> "RngStream":
        """Fresh stream with the same seed and another stream id."""
        return RngStream(self.seed, stream_id)

    def uniform(self, size=None):
        """Uniform deviates on the open-at-zero interval ``(0, 1]``."""
        return 1.0 - self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def binomial(self, n, p, size=None):
        return self._gen.binomial(n, p, size)


def _n_of(size) -> int:
    return 1 if size is None else int(np.prod(size))


# ---------------------------------------------------------------------------
# Gamma
# ---------------------------------------------------------------------------


def _marsaglia_tsang_log(r: RngStream, a: float, n: int) -> np.ndarray:
    """ln of ``n`` standard Gamma(a) draws, ``a >= 1``."""
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        k = pending.size
        x = r.normal(k)
        u = r.uniform(k)
        v = 1.0 + c * x
        ok = v > 0.0
        v = np.where(ok, v * v * v, 1.0)
        x2 = x * x
        with np.errstate(divide="ignore"):
            accept = ok & (
                (u < 1.0 - 0.0331 * x2 * x2)
                | (np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v)))
            )
        out[pending[accept]] = math.log(d) + np.log(v[accept])
        pending = pending[~accept]
    return out


def log_standard_gamma(r: RngStream, a: float, n: int) -> np.ndarray:
    """ln of ``n`` Gamma(a, 1) draws; stays finite for very small ``a``."""
    if a >= 1.0:
        return _marsaglia_tsang_log(r, a, n)
    boosted = _marsaglia_tsang_log(r, a + 1.0, n)
    return boosted + np.log(r.uniform(n)) / a


def sample_gamma(r: RngStream, p: GammaParam, size=None):
    """Gamma(alpha, rate beta) draws."""
    draws = np.exp(log_standard_gamma(r, p.alpha, _n_of(size))) / p.beta
    return float(draws[0]) if size is None else draws.reshape(size)


# ---------------------------------------------------------------------------
# Poisson
# ---------------------------------------------------------------------------


def _poisson_inversion(r: RngStream, lam: np.ndarray) -> np.ndarray:
    u = r.uniform(lam.size)
    x = np.zeros(lam.size)
    p = np.exp(-lam)
    s = p.copy()
    active = np.flatnonzero(u > s)
    steps = 0
    while active.size and steps < _INVERSION_CAP:
        x[active] += 1.0
        p[active] *= lam[active] / x[active]
        s[active] += p[active]
        active = active[u[active] > s[active]]
        steps += 1
    return x


def _poisson_ptrs(r: RngStream, lam: np.ndarray) -> np.ndarray:
    out = np.empty(lam.size)
    slam = np.sqrt(lam)
    loglam = np.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    pending = np.arange(lam.size)
    while pending.size:
        k_n = pending.size
        u = r.uniform(k_n) - 0.5
        v = r.uniform(k_n)
        us = 0.5 - np.abs(u)
        lp, ap, bp = lam[pending], a[pending], b[pending]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.floor((2.0 * ap / us + bp) * u + lp + 0.43)
        quick = (us >= 0.07) & (v <= vr[pending])
        possible = ~quick & (us > 0.0) & (k >= 0) & ~((us < 0.013) & (v > us))
        slow = np.zeros(k_n, dtype=bool)
        if possible.any():
            i = np.flatnonzero(possible)
            kk = k[i]
            lhs = np.log(v[i]) + np.log(inv_alpha[pending[i]]) - np.log(ap[i] / (us[i] ** 2) + bp[i])
            rhs = -lp[i] + kk * loglam[pending[i]] - log_gamma(kk + 1.0)
            slow[i] = lhs <= rhs
        accept = quick | slow
        out[pending[accept]] = k[accept]
        pending = pending[~accept]
    return out


def poisson_variates(r: RngStream, lam) -> np.ndarray:
    """One Poisson draw per entry of the rate array ``lam`` (entries > 0)."""
    lam = np.asarray(lam, dtype=float)
    flat = lam.ravel()
    out = np.empty(flat.size)
    small = flat < POISSON_INVERSION_MAX
    if small.any():
        out[small] = _poisson_inversion(r, flat[small])
    if (~small).any():
        out[~small] = _poisson_ptrs(r, flat[~small])
    return out.astype(np.int64).reshape(lam.shape)


def sample_poisson(r: RngStream, p: PoissonParam, size=None):
    draws = poisson_variates(r, np.full(_n_of(size), p.lam))
    return int(draws[0]) if size is None else draws.reshape(size)


# ---------------------------------------------------------------------------
# Negative binomial
# ---------------------------------------------------------------------------


def sample_negbin(r: RngStream, p: NegBinParam, size=None):
    """Poisson draws whose rates are Gamma(alpha, rate alpha / mu)."""
    n = _n_of(size)
    rate = p.complement / p.theta  # alpha / mu
    lam = np.exp(log_standard_gamma(r, p.alpha, n)) / rate
    draws = np.zeros(n, dtype=np.int64)
    positive = lam > 0.0
    draws[positive] = poisson_variates(r, lam[positive])
    return int(draws[0]) if size is None else draws.reshape(size)


# ---------------------------------------------------------------------------
# Dirichlet
# ---------------------------------------------------------------------------


def _dirichlet_rows(r: RngStream, alphas: np.ndarray, n: int) -> np.ndarray:
    log_g = np.column_stack([log_standard_gamma(r, a, n) for a in alphas])
    log_g -= log_g.max(axis=1, keepdims=True)
    g = np.exp(log_g)
    return g / g.sum(axis=1, keepdims=True)


def sample_dirichlet(r: RngStream, p: DirichletParam, size=None):
    """Independent Gamma(alpha_i, 1) draws divided by their sum."""
    rows = _dirichlet_rows(r, p.array, _n_of(size))
    if size is None:
        return SimplexVector(tuple(rows[0].tolist()))
    return rows.reshape(tuple(np.atleast_1d(size)) + (len(p.alphas),))


# ---------------------------------------------------------------------------
# Multinomial and Dirichlet-multinomial
# ---------------------------------------------------------------------------


def _multinomial_rows(r: RngStream, m, probs: np.ndarray) -> np.ndarray:
    """Sequential conditional binomials; ``probs`` has one row per draw."""
    n_rows, k = probs.shape
    out = np.zeros((n_rows, k), dtype=np.int64)
    remaining = np.broadcast_to(np.asarray(m, dtype=np.int64), (n_rows,)).copy()
    mass_left = np.ones(n_rows)
    for j in range(k - 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(mass_left > 0.0, probs[:, j] / mass_left, 0.0)
        cond = np.clip(cond, 0.0, 1.0)
        xj = r.binomial(remaining, cond)
        out[:, j] = xj
        remaining -= xj
        mass_left = mass_left - probs[:, j]
    out[:, k - 1] = remaining
    return out


def _vector_result(rows: np.ndarray, size):
    if size is None:
        return CountVector(tuple(int(v) for v in rows[0]))
    return rows.reshape(tuple(np.atleast_1d(size)) + (rows.shape[1],))


def sample_multinomial(r: RngStream, p: MultinomialParam, size=None):
    n = _n_of(size)
    probs = np.broadcast_to(p.probs.array, (n, len(p.probs)))
    return _vector_result(_multinomial_rows(r, p.m, probs), size)


def sample_dirmult(r: RngStream, p: DirMultParam, size=None):
    """Multinomial draws with Dirichlet(alpha) probability vectors."""
    n = _n_of(size)
    probs = _dirichlet_rows(r, p.array, n)
    return _vector_result(_multinomial_rows(r, p.m, probs), size)


# ---------------------------------------------------------------------------
# Conditioning (rejection) samplers
# ---------------------------------------------------------------------------


def _reject_until_total(r, draw_rows, m, n_wanted, acceptance, max_attempts):
    if acceptance < MIN_ACCEPTANCE:
        raise RejectionBudgetError(
            f"conditioning on total {m} is impractical", acceptance
        )
    budget = max_attempts * n_wanted
    attempts = 0
    kept = []
    n_kept = 0
    while n_kept < n_wanted:
        if attempts >= budget:
            raise RejectionBudgetError(
                f"rejection budget of {budget} attempts exhausted with {n_kept}/{n_wanted} draws",
                acceptance,
            )
        batch = int(min(_MAX_BATCH, budget - attempts,
                        math.ceil(1.2 * (n_wanted - n_kept) / acceptance) + 16))
        rows = draw_rows(batch)
        attempts += batch
        hit = rows[rows.sum(axis=1) == m]
        kept.append(hit)
        n_kept += hit.shape[0]
    return np.concatenate(kept)[:n_wanted]


def sample_multinomial_by_conditioning(r: RngStream, lambdas: Sequence[float], m: int,
                                       size=None, max_attempts: int = MAX_ATTEMPTS):
    """Independent Poisson(lambda_i) vectors kept only when they sum to ``m``.

    Raises ``RejectionBudgetError`` up front when ``P(total = m)`` is below
    ``MIN_ACCEPTANCE``, or once ``max_attempts`` per requested draw are used.
    """
    lam = np.array(_concentrations(lambdas, "lambdas"))
    m = _check_count(m, "m")
    acceptance = math.exp(poisson_log_pmf(PoissonParam(lam.sum()), m))

    def draw_rows(k):
        return np.column_stack([poisson_variates(r, np.full(k, li)) for li in lam])

    rows = _reject_until_total(r, draw_rows, m, _n_of(size), acceptance, max_attempts)
    return _vector_result(rows, size)


def sample_dirmult_by_conditioning(r: RngStream, alphas: Sequence[float], theta: float, m: int,
                                   size=None, max_attempts: int = MAX_ATTEMPTS):
    """Independent NB(alpha_i, theta) vectors kept only when they sum to ``m``."""
    a = np.array(_concentrations(alphas))
    m = _check_count(m, "m")
    params = [NegBinParam(ai, theta) for ai in a]
    acceptance = math.exp(negbin_log_pmf(NegBinParam(a.sum(), theta), m))

    def draw_rows(k):
        return np.column_stack([sample_negbin(r, p, k) for p in params])

    rows = _reject_until_total(r, draw_rows, m, _n_of(size), acceptance, max_attempts)
    return _vector_result(rows, size)
