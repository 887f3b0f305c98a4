"""Parameter records, log-densities and moments for the six count families.

The families are Poisson, gamma, negative binomial (shape/probability form),
Dirichlet, multinomial and Dirichlet-multinomial.  Parameter records are
frozen dataclasses validated on construction; evaluators are pure functions
working in log space.

The negative binomial ``theta`` is the per-trial success probability
``mu / (mu + alpha)``.  It is sometimes described as a scale parameter
because a shared ``theta`` plays the role of a common gamma scale in the
Poisson-gamma mixture: ``theta / (1 - theta)`` is the scale of the mixing
gamma.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Sequence, Union

import numpy as np

from countlab.errors import (
    BoundaryDensityError,
    DimensionMismatchError,
    DomainError,
    TotalMismatchError,
)
from countlab.special_fn import log_beta_multivariate, log_gamma, xlogy

SIMPLEX_TOLERANCE = 1e-9
TAIL_MASS = 1e-10


def _check_positive(value, name):
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
    return value


def _check_count(value, name="count"):
    if isinstance(value, (bool, np.bool_)):
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
    if isinstance(value, (float, np.floating)):
        if not float(value).is_integer():
            raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
        value = int(value)
    try:
        value = int(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}") from None
    if value < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
    return value


def _count_array(x, name="x"):
    arr = np.asarray(x)
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr)):
            raise DomainError(f"{name} must hold non-negative integers, got {x!r}")
    elif arr.dtype.kind not in "iu":
        raise DomainError(f"{name} must hold non-negative integers, got {x!r}")
    if np.any(arr < 0):
        raise DomainError(f"{name} must hold non-negative integers, got {x!r}")
    return arr.astype(float)


def _scalar_or_array(result, like):
    return float(result) if np.ndim(like) == 0 else result


# ---------------------------------------------------------------------------
# Support vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountVector:
    """Non-negative integer counts with cached total ``M``."""

    counts: tuple
    total: int = field(init=False)

    def __post_init__(self):
        counts = self.counts
        if isinstance(counts, CountVector):
            counts = counts.counts
        if np.ndim(counts) != 1 or len(counts) == 0:
            raise DomainError(f"counts must be a non-empty 1-d vector, got {counts!r}")
        values = tuple(_check_count(c, f"counts[{i}]") for i, c in enumerate(counts))
        object.__setattr__(self, "counts", values)
        object.__setattr__(self, "total", sum(values))

    def __len__(self):
        return len(self.counts)

    def __iter__(self):
        return iter(self.counts)

    def __getitem__(self, i):
        return self.counts[i]

    @property
    def array(self) -> np.ndarray:
        return np.array(self.counts, dtype=float)


@dataclass(frozen=True)
class SimplexVector:
    """Point of the probability simplex, stored with all ``n + 1`` coordinates.

    Inputs summing to one within ``SIMPLEX_TOLERANCE`` are renormalized
    exactly; ``renormalized`` records whether that changed anything.
    """

    coords: tuple
    renormalized: bool = field(init=False, default=False)

    def __post_init__(self):
        coords = self.coords
        if isinstance(coords, SimplexVector):
            coords = coords.coords
        arr = np.asarray(coords, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise DomainError(f"a simplex point needs at least 2 coordinates, got {coords!r}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise DomainError(f"simplex coordinates must be finite and >= 0, got {coords!r}")
        total = math.fsum(arr)
        if abs(total - 1.0) > SIMPLEX_TOLERANCE:
            raise DomainError(f"simplex coordinates must sum to 1, got sum {total!r}")
        if total != 1.0:
            arr = arr / total
            object.__setattr__(self, "renormalized", True)
        object.__setattr__(self, "coords", tuple(float(v) for v in arr))

    @classmethod
    def from_free(cls, free: Sequence[float]) -> "SimplexVector":
        """Build from the ``n`` free coordinates, appending ``1 - sum``."""
        free = [float(v) for v in free]
        return cls(tuple(free) + (1.0 - math.fsum(free),))

    @property
    def free(self) -> tuple:
        """The first ``n`` coordinates; the last one is implied."""
        return self.coords[:-1]

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoissonParam:
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "lam", _check_positive(self.lam, "lambda"))


@dataclass(frozen=True)
class GammaParam:
    """Gamma with shape ``alpha`` and rate ``beta`` (mean ``alpha / beta``)."""

    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_positive(self.alpha, "alpha"))
        object.__setattr__(self, "beta", _check_positive(self.beta, "beta"))

    @classmethod
    def from_mean(cls, alpha: float, mu: float) -> "GammaParam":
        alpha = _check_positive(alpha, "alpha")
        return cls(alpha, alpha / _check_positive(mu, "mu"))

    @property
    def mu(self) -> float:
        return self.alpha / self.beta


@dataclass(frozen=True)
class NegBinParam:
    """Negative binomial with shape ``alpha`` and probability ``theta`` in (0, 1).

    ``complement`` is ``1 - theta``; when the parameter comes from a mean it
    is computed as ``alpha / (mu + alpha)`` so that ``theta`` near one keeps
    full precision in ``mu`` and ``ln(1 - theta)``.
    """

    alpha: float
    theta: float
    complement: float = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_positive(self.alpha, "alpha"))
        theta = float(self.theta)
        if not 0.0 < theta < 1.0:
            raise DomainError(f"theta must lie strictly inside (0, 1), got {theta!r}")
        object.__setattr__(self, "theta", theta)
        comp = 1.0 - theta if self.complement is None else float(self.complement)
        # comp rounds to exactly 1 once theta is below half an ulp of 1
        if not 0.0 < comp <= 1.0 or abs(comp + theta - 1.0) > 4 * np.finfo(float).eps:
            raise DomainError(f"complement {comp!r} is not 1 - theta for theta={theta!r}")
        object.__setattr__(self, "complement", comp)

    @property
    def mu(self) -> float:
        return self.alpha * self.theta / self.complement


def negbin_from_mean(alpha: float, mu: float) -> NegBinParam:
    """Negative binomial with shape ``alpha`` and mean ``mu``."""
    alpha = _check_positive(alpha, "alpha")
    mu = _check_positive(mu, "mu")
    return NegBinParam(alpha, mu / (mu + alpha), alpha / (mu + alpha))


def _concentrations(alphas, name="alphas"):
    if isinstance(alphas, (DirichletParam, DirMultParam)):
        alphas = alphas.alphas
    arr = np.asarray(alphas, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError(f"{name} must be a vector of length >= 2, got {alphas!r}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} must all be finite and > 0, got {alphas!r}")
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class DirichletParam:
    alphas: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphas", _concentrations(self.alphas))

    @property
    def alpha0(self) -> float:
        return math.fsum(self.alphas)

    @property
    def mean_simplex(self) -> tuple:
        a0 = self.alpha0
        return tuple(a / a0 for a in self.alphas)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.alphas)


@dataclass(frozen=True)
class MultinomialParam:
    m: int
    probs: SimplexVector

    def __post_init__(self):
        object.__setattr__(self, "m", _check_count(self.m, "m"))
        if not isinstance(self.probs, SimplexVector):
            object.__setattr__(self, "probs", SimplexVector(tuple(self.probs)))


@dataclass(frozen=True)
class DirMultParam:
    m: int
    alphas: tuple

    def __post_init__(self):
        object.__setattr__(self, "m", _check_count(self.m, "m"))
        object.__setattr__(self, "alphas", _concentrations(self.alphas))

    @property
    def alpha0(self) -> float:
        return math.fsum(self.alphas)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.alphas)


Param = Union[PoissonParam, GammaParam, NegBinParam, DirichletParam, MultinomialParam, DirMultParam]


# ---------------------------------------------------------------------------
# Array kernels (no validation; shared with the constructions module)
# ---------------------------------------------------------------------------


def poisson_kernel(lam, x):
    return -lam + xlogy(x, lam) - log_gamma(np.asarray(x, dtype=float) + 1.0)


def gamma_kernel(alpha, beta, lam):
    return alpha * np.log(beta) - log_gamma(alpha) + (alpha - 1.0) * np.log(lam) - beta * lam


def negbin_kernel(alpha, theta, x, complement=None):
    x = np.asarray(x, dtype=float)
    log_comp = math.log1p(-theta) if complement is None else math.log(complement)
    return (
        log_gamma(alpha + x)
        - log_gamma(alpha)
        - log_gamma(x + 1.0)
        + x * math.log(theta)
        + alpha * log_comp
    )


# ---------------------------------------------------------------------------
# Log densities
# ---------------------------------------------------------------------------


def poisson_log_pmf(p: PoissonParam, x):
    """``-lambda + x ln(lambda) - ln(x!)``; ``x`` may be an integer array."""
    xs = _count_array(x)
    return _scalar_or_array(poisson_kernel(p.lam, xs), x)


def gamma_log_pdf(p: GammaParam, lam):
    """Gamma log-density in the shape/rate form, for ``lam > 0``."""
    arr = np.asarray(lam, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"gamma density needs lam > 0, got {lam!r}")
    return _scalar_or_array(gamma_kernel(p.alpha, p.beta, arr), lam)


def negbin_log_pmf(p: NegBinParam, x):
    xs = _count_array(x)
    return _scalar_or_array(negbin_kernel(p.alpha, p.theta, xs, p.complement), x)


def _simplex_point(z) -> np.ndarray:
    if not isinstance(z, SimplexVector):
        z = SimplexVector(tuple(z))
    return z.array


def dirichlet_log_pdf(p: DirichletParam, z) -> float:
    """Dirichlet log-density over all ``n + 1`` coordinates of ``z``.

    On the boundary (some ``z_i == 0``) the density is ``0`` where
    ``alpha_i > 1`` (returns ``-inf``), finite where ``alpha_i == 1``, and
    unbounded where ``alpha_i < 1`` (raises ``BoundaryDensityError``).
    """
    zs = _simplex_point(z)
    alphas = p.array
    if zs.size != alphas.size:
        raise DimensionMismatchError(
            f"simplex point has {zs.size} coordinates, Dirichlet has {alphas.size}"
        )
    on_boundary = zs == 0.0
    if np.any(on_boundary & (alphas < 1.0)):
        raise BoundaryDensityError("Dirichlet density is unbounded at this boundary point")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(alphas == 1.0, 0.0, (alphas - 1.0) * np.log(zs))
    return float(np.sum(terms) - log_beta_multivariate(alphas))


def _check_counts_against(x, n_categories, m):
    if not isinstance(x, CountVector):
        x = CountVector(tuple(x))
    if len(x) != n_categories:
        raise DimensionMismatchError(
            f"count vector has {len(x)} categories, parameter has {n_categories}"
        )
    if x.total != m:
        raise TotalMismatchError(f"counts sum to {x.total}, total count parameter is {m}")
    return x


def multinomial_log_pmf(p: MultinomialParam, x) -> float:
    """Multinomial log-pmf with ``0 ln 0 = 0``; a zero-probability cell with
    a positive count gives ``-inf``."""
    x = _check_counts_against(x, len(p.probs), p.m)
    xs = x.array
    probs = p.probs.array
    if np.any((probs == 0.0) & (xs > 0)):
        return -math.inf
    return float(log_gamma(p.m + 1.0) - np.sum(log_gamma(xs + 1.0)) + np.sum(xlogy(xs, probs)))


def dirmult_log_pmf(p: DirMultParam, x) -> float:
    x = _check_counts_against(x, len(p.alphas), p.m)
    xs = x.array
    alphas = p.array
    a0 = p.alpha0
    m = float(p.m)
    return float(
        log_gamma(a0)
        + log_gamma(m + 1.0)
        - log_gamma(a0 + m)
        + np.sum(log_gamma(alphas + xs) - log_gamma(alphas) - log_gamma(xs + 1.0))
    )


def dirmult_log_likelihood(alphas, rows) -> float:
    """Sum of Dirichlet-multinomial log-pmfs over rows, each with its own total."""
    a = np.asarray(alphas, dtype=float)
    x = np.asarray(rows, dtype=float)
    m = x.sum(axis=1)
    a0 = a.sum()
    per_row = (
        log_gamma(a0)
        + log_gamma(m + 1.0)
        - log_gamma(a0 + m)
        + np.sum(log_gamma(a + x) - log_gamma(a) - log_gamma(x + 1.0), axis=1)
    )
    return float(np.sum(per_row))


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Moments:
    mean: Union[float, tuple]
    variance: Union[float, tuple]


@functools.singledispatch
def moments(param) -> Moments:
    """Mean and variance (component-wise for vector families)."""
    raise TypeError(f"no moments for {type(param).__name__}")


@moments.register
def _(param: PoissonParam):
    return Moments(param.lam, param.lam)


@moments.register
def _(param: GammaParam):
    return Moments(param.alpha / param.beta, param.alpha / param.beta**2)


@moments.register
def _(param: NegBinParam):
    mu = param.mu
    return Moments(mu, mu + mu * mu / param.alpha)


@moments.register
def _(param: DirichletParam):
    pi = np.array(param.mean_simplex)
    var = pi * (1.0 - pi) / (param.alpha0 + 1.0)
    return Moments(tuple(pi.tolist()), tuple(var.tolist()))


@moments.register
def _(param: MultinomialParam):
    pi = param.probs.array
    return Moments(tuple((param.m * pi).tolist()), tuple((param.m * pi * (1.0 - pi)).tolist()))


@moments.register
def _(param: DirMultParam):
    a0 = param.alpha0
    pi = param.array / a0
    m = param.m
    var = m * pi * (1.0 - pi) * (m + a0) / (1.0 + a0)
    return Moments(tuple((m * pi).tolist()), tuple(var.tolist()))


# ---------------------------------------------------------------------------
# Support helpers
# ---------------------------------------------------------------------------


def truncated_support(param, tail: float = TAIL_MASS) -> np.ndarray:
    """Log-pmf over ``0..K`` for the smallest ``K`` leaving tail mass below ``tail``.

    Walks the pmf recurrence ``p(x+1) = p(x) * r(x)`` in log space, so the
    walk is safe even when ``p(0)`` underflows.
    """
    if isinstance(param, PoissonParam):
        log_p = -param.lam
        log_ratio = lambda x: math.log(param.lam) - math.log(x + 1.0)  # noqa: E731
    elif isinstance(param, NegBinParam):
        log_p = param.alpha * math.log(param.complement)
        log_theta = math.log(param.theta)
        log_ratio = lambda x: log_theta + math.log(param.alpha + x) - math.log(x + 1.0)  # noqa: E731
    else:
        raise TypeError(f"truncated_support needs an unbounded univariate family, got {param!r}")
    values = [log_p]
    cumulative = math.exp(log_p)
    x = 0
    while 1.0 - cumulative >= tail:
        log_p += log_ratio(x)
        x += 1
        values.append(log_p)
        cumulative += math.exp(log_p)
        if x > 10_000_000:
            raise RuntimeError("support truncation did not terminate")
    return np.array(values)


def enumerate_counts(m: int, n: int) -> Iterator[tuple]:
    """Every non-negative integer vector of length ``n`` summing to ``m``."""
    m = _check_count(m, "m")
    if n < 1:
        raise DomainError("need at least one category")
    # stars and bars: choose n-1 bar positions among m+n-1 slots
    for bars in combinations(range(m + n - 1), n - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(m + n - 1 - prev - 1)
        yield tuple(out)
