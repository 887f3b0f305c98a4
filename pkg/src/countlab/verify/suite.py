"""The theorem-checking suite.

Every identity in :mod:`countlab.constructions` and every sampler in
:mod:`countlab.samplers` is exercised over a grid and recorded as named
checks in a :class:`VerificationReport`.  Checks never abort the suite: an
exception inside a check is recorded as a failed check.

Each check draws from its own :class:`RngStream` whose stream id is the
CRC-32 of the check name, so results do not depend on which groups run or
in which order.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from countlab.constructions import (
    EquivalenceResult,
    build_jacobian,
    conditioned_negbins_heterogeneous,
    dirichlet_density_via_gamma_construction,
    dirmult_via_conditioned_negbins,
    jacobian_determinant,
    multinomial_via_conditioned_poissons,
    negbin_via_poisson_gamma_log,
)
from countlab.dist_core import (
    DirichletParam,
    DirMultParam,
    GammaParam,
    MultinomialParam,
    NegBinParam,
    PoissonParam,
    dirichlet_log_pdf,
    dirmult_log_pmf,
    enumerate_counts,
    moments,
    multinomial_log_pmf,
    negbin_from_mean,
    negbin_log_pmf,
    truncated_support,
)
from countlab.errors import ConfigError
from countlab.samplers import (
    RngStream,
    sample_dirichlet,
    sample_dirmult,
    sample_dirmult_by_conditioning,
    sample_gamma,
    sample_multinomial,
    sample_multinomial_by_conditioning,
    sample_negbin,
    sample_poisson,
)
from countlab.special_fn import regularized_beta, regularized_gamma_p
from countlab.verify.gof import chi_square_gof, ks_test, two_sample_chi_square
from countlab.verify.report import (
    EQUIVALENCE,
    GOF,
    INFORMATIONAL,
    PROPERTY,
    CheckRecord,
    VerificationReport,
)

log = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    "negbin_poisson_gamma": 1e-8,
    "multinomial_conditioned_poisson": 1e-12,
    "dirmult_conditioned_negbin": 1e-12,
    "theta_invariance": 1e-12,
    "jacobian_determinant": 1e-9,
    "dirichlet_gamma_construction": 1e-8,
    "gof_p_value": 1e-3,
    "standard_errors": 4.0,
}


@dataclass
class SuiteConfig:
    """Grids and tolerances; the defaults are the acceptance configuration."""

    negbin_alphas: Sequence[float] = (0.5, 1.0, 5.0)
    negbin_mus: Sequence[float] = (0.1, 1.0, 10.0)
    negbin_x_max: int = 50
    enum_max_total: int = 6
    enum_max_categories: int = 4
    lambda_scales: Sequence[float] = (0.1, 10.0)
    theta_grid: Sequence[float] = (0.1, 0.5, 0.9)
    jacobian_dims: Sequence[int] = tuple(range(1, 13))
    jacobian_draws: int = 100
    dirichlet_dims: Sequence[int] = (2, 3, 4)
    dirichlet_points: int = 50
    dirichlet_betas: Sequence[float] = (0.5, 1.0, 2.0)
    draws: int = 100_000
    tolerances: dict = field(default_factory=dict)
    only: Optional[Sequence[str]] = None
    jobs: int = 1

    def tolerance(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    @classmethod
    def from_mapping(cls, data: dict) -> "SuiteConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        bad_tol = set(data.get("tolerances", {})) - set(DEFAULT_TOLERANCES)
        if bad_tol:
            raise ConfigError(f"unknown tolerance keys: {sorted(bad_tol)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def validate(self):
        if self.draws < 100:
            raise ConfigError("draws must be at least 100")
        if any(not 0.0 < t < 1.0 for t in self.theta_grid):
            raise ConfigError("theta grid must lie inside (0, 1)")
        if any(int(n) < 1 for n in self.jacobian_dims):
            raise ConfigError("jacobian dimensions must be >= 1")
        if any(int(d) < 2 for d in self.dirichlet_dims):
            raise ConfigError("dirichlet dimensions must be >= 2")
        if self.enum_max_categories < 2:
            raise ConfigError("enum_max_categories must be >= 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        for k, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or not v >= 0:
                raise ConfigError(f"tolerance {k!r} must be a non-negative number")
        select_groups(self.only)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


def _stream(seed: int, name: str) -> RngStream:
    return RngStream(seed, zlib.crc32(name.encode()))


def _grid(**kw) -> dict:
    return {k: (list(v) if isinstance(v, (tuple, list, np.ndarray)) else v) for k, v in kw.items()}


def _equivalence(name, group, grid, eq: EquivalenceResult, note="") -> CheckRecord:
    return CheckRecord(
        name=name, group=group, kind=EQUIVALENCE, passed=eq.passed, grid=grid,
        lhs=eq.lhs_log_value, rhs=eq.rhs_log_value, abs_diff=eq.abs_diff,
        tolerance=eq.tolerance, note=note,
    )


def _gof(name, group, grid, res, threshold, note="") -> CheckRecord:
    return CheckRecord(
        name=name, group=group, kind=GOF, passed=bool(res.p_value > threshold), grid=grid,
        statistic=res.statistic, degrees_of_freedom=getattr(res, "degrees_of_freedom", None),
        p_value=res.p_value, pooled_cells=getattr(res, "pooled_cells", None),
        tolerance=threshold, note=note,
    )


def _mean_check(name, group, grid, samples, expected, variance, k_se) -> CheckRecord:
    samples = np.asarray(samples, dtype=float)
    se = math.sqrt(variance / samples.shape[0])
    observed = float(samples.mean())
    diff = abs(observed - expected)
    return CheckRecord(
        name=name, group=group, kind=PROPERTY, passed=diff <= k_se * se, grid=grid,
        lhs=observed, rhs=float(expected), abs_diff=diff, tolerance=k_se * se,
        note=f"sample mean within {k_se:g} standard errors",
    )


# ---------------------------------------------------------------------------
# Construction checks
# ---------------------------------------------------------------------------


def check_negbin_poisson_gamma(cfg: SuiteConfig, seed: int):
    group = "negbin_poisson_gamma"
    tol = cfg.tolerance(group)
    for alpha, mu in itertools.product(cfg.negbin_alphas, cfg.negbin_mus):
        closed_param = negbin_from_mean(alpha, mu)
        for x in range(cfg.negbin_x_max + 1):
            quad = negbin_via_poisson_gamma_log(alpha, mu, x)
            closed = negbin_log_pmf(closed_param, x)
            rel = abs(math.expm1(quad - closed))
            yield CheckRecord(
                name=f"{group}[alpha={alpha:g},mu={mu:g},x={x}]", group=group, kind=EQUIVALENCE,
                passed=rel <= tol, grid=_grid(alpha=alpha, mu=mu, x=x),
                lhs=quad, rhs=closed, abs_diff=rel, tolerance=tol,
                note="relative error of the quadrature probability",
            )


def _enumeration_grid(cfg: SuiteConfig):
    for n in range(2, cfg.enum_max_categories + 1):
        for m in range(cfg.enum_max_total + 1):
            yield n, m


def check_multinomial_conditioned_poisson(cfg: SuiteConfig, seed: int):
    group = "multinomial_conditioned_poisson"
    tol = cfg.tolerance(group)
    for n, m in _enumeration_grid(cfg):
        lam = _stream(seed, f"{group}[n={n}]").uniform(n) * 4.5 + 0.5
        probs = lam / lam.sum()
        param = MultinomialParam(m, probs)
        worst = EquivalenceResult.compare(0.0, 0.0, tol)
        scale_worst = {c: EquivalenceResult.compare(0.0, 0.0, tol) for c in cfg.lambda_scales}
        for x in enumerate_counts(m, n):
            cond = multinomial_via_conditioned_poissons(lam, x)
            eq = EquivalenceResult.compare(cond, multinomial_log_pmf(param, x), tol)
            if eq.abs_diff >= worst.abs_diff:
                worst = eq
            for c in cfg.lambda_scales:
                eq_c = EquivalenceResult.compare(
                    multinomial_via_conditioned_poissons(lam * c, x), cond, tol)
                if eq_c.abs_diff >= scale_worst[c].abs_diff:
                    scale_worst[c] = eq_c
        grid = _grid(n=n, m=m, lambdas=[float(v) for v in lam])
        yield _equivalence(f"{group}[n={n},m={m}]", group, grid, worst,
                           "max over all outcomes of |conditioned Poisson - multinomial|")
        for c, eq in scale_worst.items():
            yield _equivalence(f"{group}[n={n},m={m},scale={c:g}]", group,
                               dict(grid, scale=c), eq, "invariance under lambda -> c lambda")


def _enumeration_alphas(seed, group, n):
    return _stream(seed, f"{group}[n={n}]").uniform(n) * 4.8 + 0.2


def check_dirmult_conditioned_negbin(cfg: SuiteConfig, seed: int):
    group = "dirmult_conditioned_negbin"
    tol = cfg.tolerance(group)
    for n, m in _enumeration_grid(cfg):
        alphas = _enumeration_alphas(seed, group, n)
        param = DirMultParam(m, alphas)
        for theta in cfg.theta_grid:
            worst = EquivalenceResult.compare(0.0, 0.0, tol)
            for x in enumerate_counts(m, n):
                eq = EquivalenceResult.compare(
                    dirmult_via_conditioned_negbins(alphas, theta, x), dirmult_log_pmf(param, x), tol)
                if eq.abs_diff >= worst.abs_diff:
                    worst = eq
            yield _equivalence(
                f"{group}[n={n},m={m},theta={theta:g}]", group,
                _grid(n=n, m=m, theta=theta, alphas=[float(a) for a in alphas]), worst,
                "max over all outcomes of |conditioned NB - Dirichlet-multinomial|")


def theta_invariance_check(alphas, x, theta_grid, tolerance=1e-12) -> EquivalenceResult:
    """Largest pairwise difference of the conditioned-NB log-pmf across ``theta_grid``."""
    values = [dirmult_via_conditioned_negbins(alphas, t, x) for t in theta_grid]
    lo, hi = min(values), max(values)
    return EquivalenceResult.compare(hi, lo, tolerance)


def check_theta_invariance(cfg: SuiteConfig, seed: int):
    group = "theta_invariance"
    tol = cfg.tolerance(group)
    for alphas, x in [((1.0, 1.0), (2, 1)), ((2.0, 3.0, 0.5), (1, 2, 1))]:
        eq = theta_invariance_check(alphas, x, cfg.theta_grid, tol)
        yield _equivalence(f"{group}[alphas={list(alphas)},x={list(x)}]", group,
                           _grid(alphas=alphas, x=x, thetas=cfg.theta_grid), eq)
    for n, m in _enumeration_grid(cfg):
        alphas = _enumeration_alphas(seed, group, n)
        worst = EquivalenceResult.compare(0.0, 0.0, tol)
        for x in enumerate_counts(m, n):
            eq = theta_invariance_check(alphas, x, cfg.theta_grid, tol)
            if eq.abs_diff >= worst.abs_diff:
                worst = eq
        yield _equivalence(f"{group}[n={n},m={m}]", group,
                           _grid(n=n, m=m, alphas=[float(a) for a in alphas],
                                 thetas=cfg.theta_grid), worst)
    # Unequal theta: the conditional is no longer theta-free nor Dirichlet-multinomial.
    alphas, x = (1.0, 1.0), (2, 1)
    hetero = conditioned_negbins_heterogeneous(alphas, (0.3, 0.7), x)
    homo = conditioned_negbins_heterogeneous(alphas, (0.5, 0.5), x)
    yield CheckRecord(
        name=f"{group}[heterogeneous_control]", group=group, kind=INFORMATIONAL, passed=True,
        grid=_grid(alphas=alphas, x=x, thetas_a=[0.3, 0.7], thetas_b=[0.5, 0.5]),
        lhs=hetero, rhs=homo, abs_diff=abs(hetero - homo),
        note="unequal theta per component changes the conditional; no closed form exists",
    )


def check_jacobian_determinant(cfg: SuiteConfig, seed: int):
    group = "jacobian_determinant"
    tol = cfg.tolerance(group)
    for n in cfg.jacobian_dims:
        n = int(n)
        r = _stream(seed, f"{group}[n={n}]")
        # interior points: n free coordinates of flat Dirichlet draws
        zs = sample_dirichlet(r, DirichletParam((1.0,) * (n + 1)), cfg.jacobian_draws)[:, :n]
        ys = r.uniform(cfg.jacobian_draws) * 4.9 + 0.1
        worst_rel, worst = -1.0, None
        for z, y in zip(zs, ys.tolist()):
            det = jacobian_determinant(build_jacobian(z, y))
            expected = y**n
            rel = abs(det - expected) / expected
            if rel > worst_rel:
                worst_rel, worst = rel, (det, expected, y)
        det, expected, y = worst
        yield CheckRecord(
            name=f"{group}[n={n}]", group=group, kind=EQUIVALENCE, passed=worst_rel <= tol,
            grid=_grid(n=n, draws=cfg.jacobian_draws, worst_y=y), lhs=det, rhs=expected,
            abs_diff=worst_rel, tolerance=tol,
            note="max relative error of the LU determinant against y^n",
        )


def check_dirichlet_gamma_construction(cfg: SuiteConfig, seed: int):
    group = "dirichlet_gamma_construction"
    tol = cfg.tolerance(group)
    for dim in cfg.dirichlet_dims:
        dim = int(dim)
        r = _stream(seed, f"{group}[dim={dim}]")
        points = []
        for _ in range(cfg.dirichlet_points):
            alphas = r.uniform(dim) * 4.7 + 0.3
            z = sample_dirichlet(r, DirichletParam((1.0,) * dim))
            points.append((alphas, z))
        by_beta = {}
        for beta in cfg.dirichlet_betas:
            worst = EquivalenceResult.compare(0.0, 0.0, tol)
            values = []
            for alphas, z in points:
                quad = dirichlet_density_via_gamma_construction(alphas, z, beta)
                values.append(quad)
                eq = EquivalenceResult.compare(quad, dirichlet_log_pdf(DirichletParam(alphas), z), tol)
                if eq.abs_diff >= worst.abs_diff:
                    worst = eq
            by_beta[beta] = values
            yield _equivalence(f"{group}[dim={dim},beta={beta:g}]", group,
                               _grid(dim=dim, beta=beta, points=cfg.dirichlet_points), worst,
                               "max over points of |quadrature - closed form| log density")
        table = np.array(list(by_beta.values()))
        spread = table.max(axis=0) - table.min(axis=0)
        i = int(np.argmax(spread))
        eq = EquivalenceResult.compare(float(table[:, i].max()), float(table[:, i].min()), tol)
        yield _equivalence(f"{group}[dim={dim},beta_invariance]", group,
                           _grid(dim=dim, betas=cfg.dirichlet_betas), eq,
                           "max over points of the spread across gamma rates")


# ---------------------------------------------------------------------------
# Sampler checks
# ---------------------------------------------------------------------------


def _discrete_gof(draws: np.ndarray, log_pmf: np.ndarray):
    """Chi-square over ``0..K-1`` plus an open tail cell merged into ``K-1``."""
    probs = np.exp(log_pmf)
    probs[-1] += max(0.0, 1.0 - math.fsum(probs))
    probs /= math.fsum(probs)
    k = probs.size
    observed = np.bincount(np.minimum(draws, k - 1), minlength=k)
    return chi_square_gof(observed, probs)


def _outcome_index(rows: np.ndarray, outcomes: list) -> np.ndarray:
    m = int(sum(outcomes[0]))
    radix = (m + 1) ** np.arange(len(outcomes[0]))
    codes = np.array([int(np.dot(o, radix)) for o in outcomes])
    order = np.argsort(codes)
    row_codes = rows.astype(np.int64) @ radix
    pos = np.searchsorted(codes[order], row_codes)
    return order[pos]


def _outcome_counts(rows: np.ndarray, outcomes: list) -> np.ndarray:
    return np.bincount(_outcome_index(rows, outcomes), minlength=len(outcomes))


def check_sampler_gamma(cfg: SuiteConfig, seed: int):
    group = "sampler_gamma"
    thr = cfg.tolerance("gof_p_value")
    k_se = cfg.tolerance("standard_errors")
    for alpha, beta in [(1.0, 1.0), (0.3, 2.0), (5.0, 1.0)]:
        name = f"{group}[alpha={alpha:g},beta={beta:g}]"
        p = GammaParam(alpha, beta)
        x = sample_gamma(_stream(seed, name), p, cfg.draws)
        grid = _grid(alpha=alpha, beta=beta, draws=cfg.draws)
        res = ks_test(x, lambda v: regularized_gamma_p(alpha, beta * v))
        yield _gof(f"{name}.ks", group, grid, res, thr, "KS against the regularized gamma CDF")
        mom = moments(p)
        yield _mean_check(f"{name}.mean", group, grid, x, mom.mean, mom.variance, k_se)


def check_sampler_poisson(cfg: SuiteConfig, seed: int):
    group = "sampler_poisson"
    thr = cfg.tolerance("gof_p_value")
    for lam in (0.5, 4.0, 50.0):
        name = f"{group}[lambda={lam:g}]"
        p = PoissonParam(lam)
        x = sample_poisson(_stream(seed, name), p, cfg.draws)
        yield _gof(name, group, _grid(lam=lam, draws=cfg.draws),
                   _discrete_gof(x, truncated_support(p)), thr, "chi-square against the pmf")


def check_sampler_negbin(cfg: SuiteConfig, seed: int):
    group = "sampler_negbin"
    thr = cfg.tolerance("gof_p_value")
    k_se = cfg.tolerance("standard_errors")
    for alpha, theta in [(2.0, 0.5), (1.0, 0.3), (0.5, 0.9)]:
        name = f"{group}[alpha={alpha:g},theta={theta:g}]"
        p = NegBinParam(alpha, theta)
        x = sample_negbin(_stream(seed, name), p, cfg.draws)
        grid = _grid(alpha=alpha, theta=theta, draws=cfg.draws)
        yield _gof(name, group, grid, _discrete_gof(x, truncated_support(p)), thr,
                   "chi-square against the pmf")
        mom = moments(p)
        yield _mean_check(f"{name}.mean", group, grid, x, mom.mean, mom.variance, k_se)


def check_sampler_dirichlet(cfg: SuiteConfig, seed: int):
    group = "sampler_dirichlet"
    thr = cfg.tolerance("gof_p_value")
    k_se = cfg.tolerance("standard_errors")
    for alphas in [(1.0, 1.0), (5.0, 5.0), (2.0, 3.0, 5.0)]:
        name = f"{group}[alphas={list(alphas)}]"
        p = DirichletParam(alphas)
        z = sample_dirichlet(_stream(seed, name), p, cfg.draws)
        grid = _grid(alphas=alphas, draws=cfg.draws)
        mom = moments(p)
        for i, a in enumerate(alphas):
            yield _mean_check(f"{name}.mean[{i}]", group, grid, z[:, i], mom.mean[i],
                              mom.variance[i], k_se)
            rest = p.alpha0 - a
            res = ks_test(z[:, i], lambda v, a=a, rest=rest: regularized_beta(a, rest, v))
            yield _gof(f"{name}.ks[{i}]", group, grid, res, thr,
                       "KS of the marginal against its beta CDF")


def corner_mass(z: np.ndarray, threshold: float = 0.9) -> float:
    """Fraction of simplex draws whose largest coordinate exceeds ``threshold``."""
    return float(np.mean(np.max(z, axis=1) > threshold))


def check_dirichlet_dispersion(cfg: SuiteConfig, seed: int):
    group = "dirichlet_dispersion"
    name = f"{group}[a=0.2_vs_a=20]"
    r = _stream(seed, name)
    small = corner_mass(sample_dirichlet(r, DirichletParam((0.2, 0.2)), cfg.draws))
    large = corner_mass(sample_dirichlet(r, DirichletParam((20.0, 20.0)), cfg.draws))
    yield CheckRecord(
        name=name, group=group, kind=PROPERTY, passed=small > large,
        grid=_grid(small=[0.2, 0.2], large=[20.0, 20.0], threshold=0.9, draws=cfg.draws),
        lhs=small, rhs=large, abs_diff=small - large,
        note="corner-mass fraction (max coordinate > 0.9) must be larger for small alpha0",
    )


def check_sampler_multinomial(cfg: SuiteConfig, seed: int):
    group = "sampler_multinomial"
    thr = cfg.tolerance("gof_p_value")
    m, probs = 10, (0.2, 0.3, 0.5)
    name = f"{group}[m={m},probs={list(probs)}]"
    p = MultinomialParam(m, probs)
    rows = sample_multinomial(_stream(seed, name), p, cfg.draws)
    outcomes = list(enumerate_counts(m, len(probs)))
    expected = np.exp([multinomial_log_pmf(p, o) for o in outcomes])
    expected /= math.fsum(expected)
    grid = _grid(m=m, probs=probs, draws=cfg.draws, outcomes=len(outcomes))
    yield _gof(name, group, grid, chi_square_gof(_outcome_counts(rows, outcomes), expected), thr,
               "chi-square over every outcome")
    yield _totals_check(f"{name}.totals", group, grid, rows, m)


def _totals_check(name, group, grid, rows, m):
    totals = rows.sum(axis=1)
    bad = int(np.count_nonzero(totals != m))
    return CheckRecord(name=name, group=group, kind=PROPERTY, passed=bad == 0, grid=grid,
                       abs_diff=float(bad), tolerance=0.0, note="every draw sums to m")


def check_sampler_multinomial_conditioning(cfg: SuiteConfig, seed: int):
    group = "sampler_multinomial_conditioning"
    thr = cfg.tolerance("gof_p_value")
    for lambdas, m in [((1.0, 1.0), 2), ((2.0, 3.0, 5.0), 5)]:
        name = f"{group}[lambdas={list(lambdas)},m={m}]"
        r = _stream(seed, name)
        lam = np.array(lambdas)
        cond = sample_multinomial_by_conditioning(r, lambdas, m, cfg.draws)
        base = sample_multinomial(r, MultinomialParam(m, lam / lam.sum()), cfg.draws)
        outcomes = list(enumerate_counts(m, len(lambdas)))
        res = two_sample_chi_square(_outcome_counts(cond, outcomes), _outcome_counts(base, outcomes))
        grid = _grid(lambdas=lambdas, m=m, draws=cfg.draws)
        yield _gof(name, group, grid, res, thr, "two-sample chi-square vs the baseline sampler")
        yield _totals_check(f"{name}.totals", group, grid, cond, m)


def check_sampler_dirmult(cfg: SuiteConfig, seed: int):
    group = "sampler_dirmult"
    thr = cfg.tolerance("gof_p_value")
    for m, alphas in [(3, (1.0, 1.0)), (4, (2.0, 3.0, 0.5)), (10, (1.0, 3.0))]:
        name = f"{group}[m={m},alphas={list(alphas)}]"
        p = DirMultParam(m, alphas)
        rows = sample_dirmult(_stream(seed, name), p, cfg.draws)
        outcomes = list(enumerate_counts(m, len(alphas)))
        expected = np.exp([dirmult_log_pmf(p, o) for o in outcomes])
        expected /= math.fsum(expected)
        grid = _grid(m=m, alphas=alphas, draws=cfg.draws)
        res = chi_square_gof(_outcome_counts(rows, outcomes), expected)
        yield _gof(name, group, grid, res, thr, "chi-square over every outcome")
        yield _totals_check(f"{name}.totals", group, grid, rows, m)


def check_sampler_dirmult_conditioning(cfg: SuiteConfig, seed: int):
    group = "sampler_dirmult_conditioning"
    thr = cfg.tolerance("gof_p_value")
    # thetas keep P(total = m) above a few percent so 10^5 accepted draws stay cheap
    cases = [((1.0, 1.0), 3, (0.2, 0.8)), ((2.0, 3.0, 0.5), 4, (0.3, 0.5, 0.7))]
    for alphas, m, thetas in cases:
        outcomes = list(enumerate_counts(m, len(alphas)))
        for theta in thetas:
            name = f"{group}[alphas={list(alphas)},m={m},theta={theta:g}]"
            r = _stream(seed, name)
            cond = sample_dirmult_by_conditioning(r, alphas, theta, m, cfg.draws)
            # a fresh baseline per theta keeps the comparisons independent
            base = sample_dirmult(r, DirMultParam(m, alphas), cfg.draws)
            res = two_sample_chi_square(_outcome_counts(cond, outcomes), _outcome_counts(base, outcomes))
            grid = _grid(alphas=alphas, m=m, theta=theta, draws=cfg.draws)
            yield _gof(name, group, grid, res, thr,
                       "two-sample chi-square vs the composition sampler")
            yield _totals_check(f"{name}.totals", group, grid, cond, m)


def check_sampler_determinism(cfg: SuiteConfig, seed: int):
    group = "sampler_determinism"
    draws = min(cfg.draws, 1000)
    samplers = {
        "gamma": lambda r: sample_gamma(r, GammaParam(0.7, 1.3), draws),
        "poisson": lambda r: sample_poisson(r, PoissonParam(25.0), draws),
        "negbin": lambda r: sample_negbin(r, NegBinParam(0.5, 0.9), draws),
        "dirichlet": lambda r: sample_dirichlet(r, DirichletParam((0.5, 1.0, 2.0)), draws),
        "dirmult": lambda r: sample_dirmult(r, DirMultParam(7, (0.5, 1.0, 2.0)), draws),
        "dirmult_conditioned": lambda r: sample_dirmult_by_conditioning(r, (1.0, 2.0), 0.5, 3, draws),
    }
    for label, draw in samplers.items():
        name = f"{group}[{label}]"
        first = np.asarray(draw(_stream(seed, name)))
        second = np.asarray(draw(_stream(seed, name)))
        same = first.dtype == second.dtype and first.tobytes() == second.tobytes()
        yield CheckRecord(name=name, group=group, kind=PROPERTY, passed=same,
                          grid=_grid(draws=draws), note="identical (seed, stream) gives identical bytes")


MANIFEST: dict = {
    "negbin_poisson_gamma": check_negbin_poisson_gamma,
    "multinomial_conditioned_poisson": check_multinomial_conditioned_poisson,
    "dirmult_conditioned_negbin": check_dirmult_conditioned_negbin,
    "theta_invariance": check_theta_invariance,
    "jacobian_determinant": check_jacobian_determinant,
    "dirichlet_gamma_construction": check_dirichlet_gamma_construction,
    "sampler_gamma": check_sampler_gamma,
    "sampler_poisson": check_sampler_poisson,
    "sampler_negbin": check_sampler_negbin,
    "sampler_dirichlet": check_sampler_dirichlet,
    "dirichlet_dispersion": check_dirichlet_dispersion,
    "sampler_multinomial": check_sampler_multinomial,
    "sampler_multinomial_conditioning": check_sampler_multinomial_conditioning,
    "sampler_dirmult": check_sampler_dirmult,
    "sampler_dirmult_conditioning": check_sampler_dirmult_conditioning,
    "sampler_determinism": check_sampler_determinism,
}


def select_groups(only: Optional[Iterable[str]]) -> list:
    """Manifest groups matching ``only`` (exact names or name prefixes)."""
    if not only:
        return list(MANIFEST)
    chosen = []
    for token in only:
        token = token.strip()
        hits = [g for g in MANIFEST if g == token or g.startswith(token)]
        if not hits:
            raise ConfigError(f"no check group matches {token!r}; known groups: {list(MANIFEST)}")
        chosen.extend(h for h in hits if h not in chosen)
    return [g for g in MANIFEST if g in chosen]


def _run_group(group: str, cfg: SuiteConfig, seed: int) -> list:
    start = time.perf_counter()
    records = []
    checker: Callable = MANIFEST[group]
    it = iter(checker(cfg, seed))
    while True:
        t0 = time.perf_counter()
        try:
            rec = next(it)
        except StopIteration:
            break
        except Exception as exc:  # a broken check is a failed check, never an aborted suite
            log.exception("check group %s raised", group)
            records.append(CheckRecord(name=f"{group}[error]", group=group, kind=PROPERTY,
                                       passed=False, note=f"{type(exc).__name__}: {exc}"))
            break
        records.append(dataclasses.replace(rec, elapsed=time.perf_counter() - t0))
    log.info("%s: %d checks, %d failed, %.2fs", group, len(records),
             sum(not r.passed for r in records), time.perf_counter() - start)
    return records


def run_theorem_suite(seed: int = 0, config: Optional[SuiteConfig] = None) -> VerificationReport:
    """Run every selected check group and assemble the report in manifest order."""
    cfg = config or SuiteConfig()
    cfg.validate()
    groups = select_groups(cfg.only)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(lambda g: _run_group(g, cfg, seed), groups))
    else:
        results = [_run_group(g, cfg, seed) for g in groups]
    checks = tuple(rec for group_records in results for rec in group_records)
    return VerificationReport(checks=checks, seed=seed, config=cfg.to_dict())
