import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from countlab.dist_core import DirMultParam, NegBinParam, PoissonParam, negbin_from_mean
from countlab.errors import DegenerateDataError, DomainError
from countlab.fitting import (
    BOUNDARY,
    CONVERGED,
    DEGENERATE,
    NB_ALPHA_CAP,
    POISSON_RATE_FLOOR,
    _moments_start,
    dirmult_loglik,
    dirmult_score,
    fit_dirmult,
    fit_negbin,
    fit_poisson,
    moments_init_negbin,
    negbin_alpha_from_moments,
    negbin_profile_loglik,
    negbin_profile_score,
)
from countlab.dist_core import dirmult_log_likelihood
from countlab.samplers import RngStream, sample_dirmult, sample_negbin, sample_poisson

FD_STEP = 1e-5


def _nb_data(seed, n, alpha=2.0, mu=5.0):
    return sample_negbin(RngStream(seed, 11), negbin_from_mean(alpha, mu), n)


def _dm_data(seed, n, m=50, alphas=(1.0, 2.0, 3.0)):
    return sample_dirmult(RngStream(seed, 12), DirMultParam(m, alphas), n)


@pytest.fixture(scope="module")
def nb_fit():
    x = _nb_data(0, 10_000)
    return x, fit_negbin(x)


@pytest.fixture(scope="module")
def dm_fit():
    x = _dm_data(0, 2000)
    return x, fit_dirmult(x)


class TestPoisson:
    def test_mean(self):
        assert fit_poisson([0, 2, 4]).params.lam == 2.0
        assert fit_poisson([5, 5, 5, 5]).params.lam == 5.0

    def test_recovery(self):
        x = sample_poisson(RngStream(1, 0), PoissonParam(3.7), 10_000)
        fit = fit_poisson(x)
        assert abs(fit.params.lam - 3.7) <= 4 * math.sqrt(3.7 / 10_000)
        assert fit.converged and fit.status == CONVERGED

    def test_loglik_is_sum(self):
        from countlab.dist_core import poisson_log_pmf
        fit = fit_poisson([1, 3, 0, 7])
        assert fit.log_likelihood == pytest.approx(
            sum(poisson_log_pmf(PoissonParam(2.75), v) for v in (1, 3, 0, 7)), rel=1e-14)

    def test_all_zero_is_degenerate(self):
        fit = fit_poisson([0, 0, 0])
        assert fit.params.lam == POISSON_RATE_FLOOR
        assert fit.status == DEGENERATE and fit.flags["degenerate"]
        assert math.isfinite(fit.log_likelihood)

    @pytest.mark.parametrize("bad", [[], [1, -1], [1.5, 2]])
    def test_rejects(self, bad):
        with pytest.raises(DomainError):
            fit_poisson(bad)


class TestMomentsInit:
    def test_formula(self):
        assert negbin_alpha_from_moments(2.0, 4.0) == 2.0
        assert negbin_alpha_from_moments(5.0, 5.5) == pytest.approx(50.0, rel=1e-12)

    def test_boundary_rejected(self):
        with pytest.raises(DegenerateDataError):
            negbin_alpha_from_moments(3.0, 3.0)

    def test_from_data(self):
        # mean 2, population variance 4
        p = moments_init_negbin([0, 0, 4, 4])
        assert p.alpha == pytest.approx(2.0, rel=1e-12)
        assert p.mu == pytest.approx(2.0, rel=1e-12)

    def test_from_data_rejects_constant(self):
        with pytest.raises(DegenerateDataError):
            moments_init_negbin([3, 3, 3])


class TestNegBin:
    def test_recovery_within_4se(self, nb_fit):
        _, fit = nb_fit
        assert fit.converged
        assert abs(fit.params.alpha - 2.0) <= 4 * fit.standard_errors["alpha"]

    def test_mu_is_sample_mean(self, nb_fit):
        x, fit = nb_fit
        assert fit.params.mu == pytest.approx(float(np.mean(x)), rel=1e-12)

    def test_score_matches_finite_difference(self, nb_fit):
        x, fit = nb_fit
        eta = math.log(fit.params.alpha)
        for shift in (0.0, 0.3, -0.5):
            a = math.exp(eta + shift)
            fd = (negbin_profile_loglik(x, a * math.exp(FD_STEP))
                  - negbin_profile_loglik(x, a * math.exp(-FD_STEP))) / (2 * FD_STEP)
            assert abs(negbin_profile_score(x, a) - fd) <= 1e-4 * max(1.0, abs(fd))

    def test_gradient_small_at_optimum(self, nb_fit):
        _, fit = nb_fit
        assert fit.gradient_norm <= 1e-8

    def test_dominates_moments_start(self, nb_fit):
        x, fit = nb_fit
        start = moments_init_negbin(x)
        assert fit.log_likelihood >= negbin_profile_loglik(x, start.alpha)

    def test_trace_nondecreasing(self, nb_fit):
        _, fit = nb_fit
        assert all(b >= a - 1e-9 * abs(a) for a, b in zip(fit.trace, fit.trace[1:]))

    @pytest.mark.parametrize("data", [[4, 4, 4, 4], [1, 2, 1, 2], [0, 0, 0]])
    def test_boundary(self, data):
        fit = fit_negbin(data)
        assert fit.status == BOUNDARY and not fit.converged
        assert fit.flags["boundary"]
        assert fit.params.alpha == NB_ALPHA_CAP

    def test_boundary_approaches_poisson(self):
        from countlab.dist_core import negbin_log_pmf, poisson_log_pmf
        fit = fit_negbin([2, 3, 2, 3])
        assert negbin_log_pmf(fit.params, 2) == pytest.approx(
            poisson_log_pmf(PoissonParam(2.5), 2), abs=1e-7)

    def test_needs_two_points(self):
        with pytest.raises(DomainError):
            fit_negbin([3])

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.3, 20.0), st.floats(0.5, 30.0), st.integers(0, 2**32))
    def test_property_dominance_and_score(self, alpha, mu, seed):
        x = _nb_data(seed, 300, alpha, mu)
        try:
            start = moments_init_negbin(x)
        except DegenerateDataError:
            return
        fit = fit_negbin(x)
        assert fit.log_likelihood >= negbin_profile_loglik(x, start.alpha) - 1e-9
        if fit.converged:
            assert fit.gradient_norm <= 1e-8


class TestDirMult:
    def test_recovery_within_15_percent(self, dm_fit):
        _, fit = dm_fit
        assert fit.converged
        for est, true in zip(fit.params.alphas, (1.0, 2.0, 3.0)):
            assert abs(est - true) <= 0.15 * true

    def test_common_total_recorded(self, dm_fit):
        _, fit = dm_fit
        assert fit.params.m == 50 and not fit.flags["row_totals_vary"]

    def test_score_matches_finite_difference(self, dm_fit):
        x, fit = dm_fit
        a = np.asarray(fit.params.alphas) * np.array([1.2, 0.8, 1.1])
        score = dirmult_score(a, x)
        for k in range(3):
            e = np.zeros(3)
            e[k] = FD_STEP
            fd = (dirmult_loglik(a * np.exp(e), x) - dirmult_loglik(a * np.exp(-e), x)) / (2 * FD_STEP)
            assert abs(score[k] - fd) <= 1e-4 * max(1.0, abs(fd))

    def test_gradient_small_at_optimum(self, dm_fit):
        x, fit = dm_fit
        assert fit.gradient_norm <= 1e-8
        assert np.linalg.norm(dirmult_score(fit.params.alphas, x)) <= 1e-8

    def test_dominates_moments_start(self, dm_fit):
        x, fit = dm_fit
        assert fit.log_likelihood >= dirmult_log_likelihood(_moments_start(np.asarray(x, float)), np.asarray(x, float))

    def test_fixed_point_monotone(self, dm_fit):
        _, fit = dm_fit
        n_fp = fit.flags["fixed_point_iterations"]
        head = fit.trace[: n_fp + 1]
        assert all(b >= a for a, b in zip(head, head[1:]))

    def test_varying_totals(self):
        r = RngStream(3, 0)
        rows = np.vstack([sample_dirmult(r, DirMultParam(m, (1.0, 2.0)), 200) for m in (5, 20)])
        fit = fit_dirmult(rows)
        assert fit.converged and fit.params.m == 0 and fit.flags["row_totals_vary"]

    def test_identical_rows_near_multinomial(self):
        fit = fit_dirmult([[10, 20, 30]] * 50)
        assert fit.flags["near_multinomial"]
        assert sum(fit.params.alphas) >= 1e6

    def test_zero_category_reported(self):
        with pytest.raises(DegenerateDataError) as info:
            fit_dirmult([[1, 0, 2], [3, 0, 1]])
        assert info.value.index == 1

    def test_dimension_one_rejected(self):
        with pytest.raises(DomainError):
            fit_dirmult([[3], [4]])

    def test_needs_two_rows(self):
        with pytest.raises(DomainError):
            fit_dirmult([[1, 2]])

    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.floats(0.2, 5.0), min_size=2, max_size=4), st.integers(0, 2**32))
    def test_property_monotone_and_dominance(self, alphas, seed):
        x = _dm_data(seed, 200, m=15, alphas=tuple(alphas))
        if np.any(x.sum(axis=0) == 0):
            return
        fit = fit_dirmult(x)
        n_fp = fit.flags["fixed_point_iterations"]
        head = fit.trace[: n_fp + 1]
        assert all(b >= a - 1e-10 * abs(a) for a, b in zip(head, head[1:]))
        xf = np.asarray(x, float)
        assert fit.log_likelihood >= dirmult_log_likelihood(_moments_start(xf), xf) - 1e-9


class TestConsistency:
    REPS = 50

    def _median_error(self, fit_alpha, n, base):
        return float(np.median([abs(fit_alpha(base + i, n)) for i in range(self.REPS)]))

    def test_negbin(self):
        def err(seed, n):
            return fit_negbin(_nb_data(seed, n)).params.alpha - 2.0
        small = self._median_error(err, 200, 1000)
        large = self._median_error(err, 2000, 2000)
        assert large < small

    def test_dirmult(self):
        def err(seed, n):
            est = np.asarray(fit_dirmult(_dm_data(seed, n, m=20)).params.alphas)
            return np.max(np.abs(est - (1.0, 2.0, 3.0)))
        small = self._median_error(err, 30, 3000)
        large = self._median_error(err, 300, 4000)
        assert large < small
