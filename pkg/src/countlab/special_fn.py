"""Special functions used by the log-densities, samplers and fitters.

Every function accepts a scalar or an array-like and returns the same kind
(a Python float for scalar input, an ndarray otherwise).

Algorithms
----------
log_gamma
    Shift the argument up to ``x >= 10`` with the recurrence
    ``ln G(x) = ln G(x + k) - ln(x (x+1) ... (x+k-1))`` and evaluate the
    Stirling series with eight Bernoulli terms.  The first omitted term is
    below 2e-18 at ``x = 10``.  Integers up to 30 come from an exact
    factorial table so that ``log_gamma(1) == log_gamma(2) == 0``.
digamma, trigamma
    Shift to ``x >= 6`` and evaluate the asymptotic series through the
    ``B_20`` term (truncation error below 1e-14 at the threshold).
regularized_gamma_p / regularized_gamma_q
    Power series for ``x < a + 1``, modified Lentz continued fraction
    otherwise.
regularized_beta
    Continued fraction with the symmetry ``I_x(a, b) = 1 - I_{1-x}(b, a)``.
"""
from __future__ import annotations

import math

import numpy as np

from countlab.errors import DomainError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

LOG_GAMMA_SHIFT = 10.0
PSI_SHIFT = 6.0

# B_{2k} / (2k (2k - 1)), k = 1..8
_STIRLING_COEFFS = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)

# B_{2k} / (2k), k = 1..10
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
    43867.0 / 14364.0,
    -174611.0 / 6600.0,
)

# B_{2k}, k = 1..10
_TRIGAMMA_COEFFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
)

_LOG_FACTORIAL_TABLE = np.array([math.log(math.factorial(k)) for k in range(30)])

_TINY = 1e-300
_EPS = 2.0 ** -53
_MAX_ITER = 100_000


def _positive(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} must be finite and > 0, got {x!r}")
    return arr


def _out(arr, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def _horner(coeffs, w):
    acc = np.zeros_like(w)
    for c in reversed(coeffs):
        acc = acc * w + c
    return acc


def _stirling(z):
    inv = 1.0 / z
    series = inv * _horner(_STIRLING_COEFFS, inv * inv)
    return (z - 0.5) * np.log(z) - z + LOG_SQRT_2PI + series


def _log_gamma_scalar(x: float) -> float:
    # same recurrence and series as the array path, without numpy overhead
    if x == math.floor(x) and x <= len(_LOG_FACTORIAL_TABLE):
        return float(_LOG_FACTORIAL_TABLE[int(x) - 1])
    z, prod = x, 1.0
    while z < LOG_GAMMA_SHIFT:
        prod *= z
        z += 1.0
    inv = 1.0 / z
    w = inv * inv
    acc = 0.0
    for c in reversed(_STIRLING_COEFFS):
        acc = acc * w + c
    return (z - 0.5) * math.log(z) - z + LOG_SQRT_2PI + inv * acc - math.log(prod)


def log_gamma(x):
    """Natural log of the gamma function for ``x > 0``.

    Raises
    ------
    DomainError
        If any ``x`` is non-positive or non-finite.
    """
    if isinstance(x, (float, int)) and not isinstance(x, bool):
        if not (math.isfinite(x) and x > 0):
            raise DomainError(f"x must be finite and > 0, got {x!r}")
        return _log_gamma_scalar(float(x))
    arr = np.atleast_1d(_positive(x))
    z = arr.copy()
    prod = np.ones_like(z)
    small = z < LOG_GAMMA_SHIFT
    while small.any():
        prod[small] *= z[small]
        z[small] += 1.0
        small = z < LOG_GAMMA_SHIFT
    result = _stirling(z) - np.log(prod)

    is_table_int = (arr == np.floor(arr)) & (arr <= len(_LOG_FACTORIAL_TABLE))
    if is_table_int.any():
        result[is_table_int] = _LOG_FACTORIAL_TABLE[arr[is_table_int].astype(int) - 1]
    return _out(result if np.ndim(x) else result[0], x)


def digamma(x):
    """Derivative of ``log_gamma``."""
    arr = np.atleast_1d(_positive(x))
    z = arr.copy()
    shift = np.zeros_like(z)
    small = z < PSI_SHIFT
    while small.any():
        shift[small] += 1.0 / z[small]
        z[small] += 1.0
        small = z < PSI_SHIFT
    inv2 = 1.0 / (z * z)
    result = np.log(z) - 0.5 / z - inv2 * _horner(_DIGAMMA_COEFFS, inv2) - shift
    return _out(result if np.ndim(x) else result[0], x)


def trigamma(x):
    """Second derivative of ``log_gamma``."""
    arr = np.atleast_1d(_positive(x))
    z = arr.copy()
    shift = np.zeros_like(z)
    small = z < PSI_SHIFT
    while small.any():
        shift[small] += 1.0 / (z[small] * z[small])
        z[small] += 1.0
        small = z < PSI_SHIFT
    inv = 1.0 / z
    inv2 = inv * inv
    result = inv + 0.5 * inv2 + inv * inv2 * _horner(_TRIGAMMA_COEFFS, inv2) + shift
    return _out(result if np.ndim(x) else result[0], x)


def log_beta_multivariate(alphas):
    """``sum(log_gamma(alphas)) - log_gamma(sum(alphas))`` over the last axis."""
    arr = np.asarray(alphas, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise DomainError("log_beta_multivariate needs at least two concentrations")
    _positive(arr, "alphas")
    return _out(
        np.sum(np.atleast_1d(log_gamma(arr)), axis=-1) - log_gamma(np.sum(arr, axis=-1)),
        arr[..., 0],
    )


def _gamma_prefactor(a, x):
    """``exp(a ln x - x - ln G(a))`` with x > 0."""
    return np.exp(a * np.log(x) - x - log_gamma(a))


def _gamma_series(a, x):
    # P(a, x) = e^-x x^a / G(a+1) * sum_n x^n / ((a+1)...(a+n))
    ap = a.copy()
    term = 1.0 / a
    total = term.copy()
    active = np.ones(a.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        if not active.any():
            break
        ap[active] += 1.0
        term[active] *= x[active] / ap[active]
        total[active] += term[active]
        active &= np.abs(term) > np.abs(total) * _EPS
    return total * _gamma_prefactor(a, x)


def _gamma_continued_fraction(a, x):
    # Q(a, x) via modified Lentz.
    b = x + 1.0 - a
    c = np.full_like(a, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(a.shape, dtype=bool)
    for i in range(1, _MAX_ITER):
        if not active.any():
            break
        an = -i * (i - a)
        b = b + 2.0
        d_new = an * d + b
        d_new = np.where(np.abs(d_new) < _TINY, _TINY, d_new)
        c_new = b + an / c
        c_new = np.where(np.abs(c_new) < _TINY, _TINY, c_new)
        d_new = 1.0 / d_new
        delta = d_new * c_new
        d = np.where(active, d_new, d)
        c = np.where(active, c_new, c)
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _EPS
    return h * _gamma_prefactor(a, x)


def _incomplete_gamma(a, x, upper):
    a_arr = np.asarray(a, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(a_arr)) or np.any(a_arr <= 0.0):
        raise DomainError(f"shape a must be finite and > 0, got {a!r}")
    if np.any(np.isnan(x_arr)) or np.any(x_arr < 0.0):
        raise DomainError(f"x must be >= 0, got {x!r}")
    a_b, x_b = np.broadcast_arrays(np.atleast_1d(a_arr), np.atleast_1d(x_arr))
    a_b = a_b.astype(float).copy()
    x_b = x_b.astype(float).copy()
    p = np.zeros_like(x_b)
    q = np.ones_like(x_b)

    inf = np.isinf(x_b)
    p[inf], q[inf] = 1.0, 0.0
    pos = (x_b > 0.0) & ~inf
    use_series = pos & (x_b < a_b + 1.0)
    use_cf = pos & ~use_series
    if use_series.any():
        ps = np.clip(_gamma_series(a_b[use_series], x_b[use_series]), 0.0, 1.0)
        p[use_series], q[use_series] = ps, 1.0 - ps
    if use_cf.any():
        qs = np.clip(_gamma_continued_fraction(a_b[use_cf], x_b[use_cf]), 0.0, 1.0)
        p[use_cf], q[use_cf] = 1.0 - qs, qs
    result = q if upper else p
    if np.ndim(a) == 0 and np.ndim(x) == 0:
        return float(result[0])
    return result.reshape(np.broadcast_shapes(np.shape(a), np.shape(x)))


def regularized_gamma_p(a, x):
    """Lower regularized incomplete gamma ``P(a, x)``, for ``a > 0, x >= 0``."""
    return _incomplete_gamma(a, x, upper=False)


def regularized_gamma_q(a, x):
    """Upper tail ``Q(a, x) = 1 - P(a, x)``, computed without cancellation."""
    return _incomplete_gamma(a, x, upper=True)


def _beta_continued_fraction(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, _MAX_ITER):
        if not active.any():
            break
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d1 = 1.0 + aa * d
        d1 = 1.0 / np.where(np.abs(d1) < _TINY, _TINY, d1)
        c1 = 1.0 + aa / c
        c1 = np.where(np.abs(c1) < _TINY, _TINY, c1)
        h1 = h * d1 * c1
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d2 = 1.0 + aa * d1
        d2 = 1.0 / np.where(np.abs(d2) < _TINY, _TINY, d2)
        c2 = 1.0 + aa / c1
        c2 = np.where(np.abs(c2) < _TINY, _TINY, c2)
        delta = d2 * c2
        d = np.where(active, d2, d)
        c = np.where(active, c2, c)
        h = np.where(active, h1 * delta, h)
        active &= np.abs(delta - 1.0) > _EPS
    return h


def regularized_beta(a, b, x):
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0`` and ``0 <= x <= 1``."""
    _positive(a, "a")
    _positive(b, "b")
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(x_arr)) or np.any((x_arr < 0.0) | (x_arr > 1.0)):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    a_b, b_b, x_b = (
        np.array(v, dtype=float)
        for v in np.broadcast_arrays(np.atleast_1d(a), np.atleast_1d(b), np.atleast_1d(x_arr))
    )
    out = np.where(x_b >= 1.0, 1.0, 0.0)
    inner = (x_b > 0.0) & (x_b < 1.0)
    if inner.any():
        ai, bi, xi = a_b[inner], b_b[inner], x_b[inner]
        log_front = (
            ai * np.log(xi)
            + bi * np.log1p(-xi)
            - (log_gamma(ai) + log_gamma(bi) - log_gamma(ai + bi))
        )
        direct = xi < (ai + 1.0) / (ai + bi + 2.0)
        val = np.empty_like(xi)
        if direct.any():
            val[direct] = (
                np.exp(log_front[direct])
                * _beta_continued_fraction(ai[direct], bi[direct], xi[direct])
                / ai[direct]
            )
        flip = ~direct
        if flip.any():
            val[flip] = 1.0 - (
                np.exp(log_front[flip])
                * _beta_continued_fraction(bi[flip], ai[flip], 1.0 - xi[flip])
                / bi[flip]
            )
        out[inner] = np.clip(val, 0.0, 1.0)
    if np.ndim(a) == 0 and np.ndim(b) == 0 and np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.broadcast_shapes(np.shape(a), np.shape(b), np.shape(x)))


def log_sum_exp(values):
    """``ln(sum(exp(values)))`` without overflow; all ``-inf`` gives ``-inf``."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("log_sum_exp of an empty vector")
    top = np.max(arr)
    if not np.isfinite(top):
        return float(top)
    return float(top + np.log(np.sum(np.exp(arr - top))))


def xlogy(x, y):
    """``x * ln(y)`` with the convention ``0 * ln(0) = 0``."""
    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x_arr == 0.0, 0.0, x_arr * np.log(y_arr))
    return _out(out, out)
