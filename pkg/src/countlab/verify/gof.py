"""Goodness-of-fit statistics: one-sample and two-sample chi-square, and KS.

Cells are pooled from the tails inward until every pooled cell has
expected count at least ``min_expected``: the leftmost cells are merged
rightwards, then the rightmost leftwards, then any remaining interior cell
below the threshold is merged into its right neighbour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from countlab.errors import DomainError
from countlab.special_fn import regularized_gamma_q

MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class GofResult:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    pooled_cells: int


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n: int


def pool_cells(groups: list, weight: Callable[[np.ndarray], float], min_expected=MIN_EXPECTED):
    """Merge adjacent cells (arrays of per-sample columns) until
    ``weight(cell) >= min_expected`` for all of them."""
    cells = [np.array(g, dtype=float) for g in groups]
    while len(cells) > 1 and weight(cells[0]) < min_expected:
        cells[1] = cells[1] + cells[0]
        cells.pop(0)
    while len(cells) > 1 and weight(cells[-1]) < min_expected:
        cells[-2] = cells[-2] + cells[-1]
        cells.pop()
    i = 1
    while i < len(cells) - 1:
        if weight(cells[i]) < min_expected:
            cells[i + 1] = cells[i + 1] + cells[i]
            cells.pop(i)
        else:
            i += 1
    return cells


def chi_square_p_value(statistic: float, dof: int) -> float:
    """Upper tail of the chi-square distribution, ``Q(dof / 2, stat / 2)``."""
    return float(regularized_gamma_q(dof / 2.0, max(statistic, 0.0) / 2.0))


def chi_square_gof(observed: Sequence[float], expected_probs: Sequence[float],
                   min_expected: float = MIN_EXPECTED, ddof: int = 0) -> GofResult:
    """Pearson chi-square test of observed counts against cell probabilities.

    Raises
    ------
    DomainError
        If the probabilities do not sum to one, nothing was observed, or
        fewer than two cells survive pooling.
    """
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    if obs.shape != probs.shape or obs.ndim != 1:
        raise DomainError("observed and expected_probs must be 1-d vectors of equal length")
    if np.any(probs < 0.0) or abs(math.fsum(probs) - 1.0) > 1e-9:
        raise DomainError("expected probabilities must be non-negative and sum to 1")
    total = obs.sum()
    if total <= 0:
        raise DomainError("no observations")
    expected = total * probs
    cells = pool_cells(
        [np.array([o, e]) for o, e in zip(obs, expected)],
        weight=lambda c: c[1],
        min_expected=min_expected,
    )
    if len(cells) < 2:
        raise DomainError("fewer than two cells after pooling")
    pooled = np.array(cells)
    stat = float(np.sum((pooled[:, 0] - pooled[:, 1]) ** 2 / pooled[:, 1]))
    dof = len(cells) - 1 - ddof
    return GofResult(stat, dof, chi_square_p_value(stat, dof), len(cells))


def two_sample_chi_square(counts_a: Sequence[float], counts_b: Sequence[float],
                          min_expected: float = MIN_EXPECTED) -> GofResult:
    """Chi-square test that two samples of category counts share a distribution."""
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("count vectors must be 1-d and of equal length")
    n_a, n_b = a.sum(), b.sum()
    if n_a <= 0 or n_b <= 0:
        raise DomainError("both samples must be non-empty")
    share = min(n_a, n_b) / (n_a + n_b)
    cells = pool_cells(
        [np.array([x, y]) for x, y in zip(a, b)],
        weight=lambda c: (c[0] + c[1]) * share,
        min_expected=min_expected,
    )
    if len(cells) < 2:
        raise DomainError("fewer than two cells after pooling")
    table = np.array(cells)
    col = table.sum(axis=1)
    n = n_a + n_b
    exp_a = col * n_a / n
    exp_b = col * n_b / n
    stat = float(np.sum((table[:, 0] - exp_a) ** 2 / exp_a + (table[:, 1] - exp_b) ** 2 / exp_b))
    dof = len(cells) - 1
    return GofResult(stat, dof, chi_square_p_value(stat, dof), len(cells))


def kolmogorov_p_value(statistic: float, n: int) -> float:
    """Asymptotic Kolmogorov tail with Stephens' finite-sample correction."""
    sqrt_n = math.sqrt(n)
    lam = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic
    if lam < 0.2:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return float(min(1.0, max(0.0, total)))


def ks_test(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> KsResult:
    """One-sample Kolmogorov-Smirnov test against a continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("no samples")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return KsResult(d, kolmogorov_p_value(d, n), n)
