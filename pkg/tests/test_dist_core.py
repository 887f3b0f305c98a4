import math
from dataclasses import FrozenInstanceError

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle_values as ov
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
    enumerate_counts,
    gamma_log_pdf,
    moments,
    multinomial_log_pmf,
    negbin_from_mean,
    negbin_log_pmf,
    poisson_log_pmf,
    truncated_support,
)
from countlab.errors import (
    BoundaryDensityError,
    DimensionMismatchError,
    DomainError,
    TotalMismatchError,
)
from countlab.samplers import RngStream, sample_negbin


class TestConstruction:
    @pytest.mark.parametrize("lam", [0.0, -1.0, math.inf, math.nan])
    def test_poisson_rejects(self, lam):
        with pytest.raises(DomainError):
            PoissonParam(lam)

    @pytest.mark.parametrize("theta", [0.0, 1.0, -0.1, 1.5])
    def test_negbin_rejects_boundary_theta(self, theta):
        with pytest.raises(DomainError):
            NegBinParam(1.0, theta)

    def test_negbin_from_mean_examples(self):
        assert negbin_from_mean(3.0, 3.0).theta == 0.5
        assert negbin_from_mean(2.0, 8.0).theta == pytest.approx(0.8, abs=1e-15)
        with pytest.raises(DomainError):
            negbin_from_mean(1.0, 0.0)

    @given(st.floats(1e-3, 1e4), st.floats(1e-3, 1e4))
    def test_mean_round_trip(self, alpha, mu):
        assert negbin_from_mean(alpha, mu).mu == pytest.approx(mu, rel=1e-12)

    def test_gamma_mean_form(self):
        g = GammaParam.from_mean(2.5, 5.0)
        assert g.beta == pytest.approx(0.5)
        assert g.mu * g.beta == pytest.approx(g.alpha, rel=1e-15)

    def test_dirichlet_derived(self):
        p = DirichletParam((1.0, 1.0, 2.0))
        assert p.alpha0 == 4.0
        assert p.mean_simplex == pytest.approx((0.25, 0.25, 0.5))
        with pytest.raises(DomainError):
            DirichletParam((1.0,))
        with pytest.raises(DomainError):
            DirichletParam((1.0, -1.0))

    def test_frozen(self):
        with pytest.raises(FrozenInstanceError):
            PoissonParam(1.0).lam = 2.0


class TestVectors:
    def test_count_vector(self):
        x = CountVector((1, 2, 3))
        assert x.total == 6 and len(x) == 3
        with pytest.raises(DomainError):
            CountVector((1, -1))
        with pytest.raises(DomainError):
            CountVector((1.5, 1))

    def test_simplex_tolerance_and_renormalization(self):
        exact = SimplexVector((0.25, 0.75))
        assert not exact.renormalized
        near = SimplexVector((0.3, 0.7 + 5e-10))
        assert near.renormalized
        assert math.fsum(near.coords) == pytest.approx(1.0, abs=1e-16)
        with pytest.raises(DomainError):
            SimplexVector((0.3, 0.7 + 1e-8))
        with pytest.raises(DomainError):
            SimplexVector((1.2, -0.2))

    def test_free_coordinates(self):
        z = SimplexVector.from_free((0.2, 0.3))
        assert z.coords == pytest.approx((0.2, 0.3, 0.5))
        assert z.free == pytest.approx((0.2, 0.3))

    def test_enumeration_count(self):
        assert len(list(enumerate_counts(10, 3))) == 66
        assert list(enumerate_counts(0, 3)) == [(0, 0, 0)]
        assert set(enumerate_counts(2, 2)) == {(2, 0), (1, 1), (0, 2)}


class TestEvaluators:
    def test_poisson(self):
        assert poisson_log_pmf(PoissonParam(1.0), 0) == -1.0
        assert poisson_log_pmf(PoissonParam(2.0), 2) == pytest.approx(math.log(2) - 2, abs=1e-15)
        assert poisson_log_pmf(PoissonParam(7.3), 40) == pytest.approx(ov.POISSON_7_3_AT_40, abs=1e-12)
        with pytest.raises(DomainError):
            poisson_log_pmf(PoissonParam(1.0), -1)

    def test_gamma(self):
        assert gamma_log_pdf(GammaParam(1.0, 1.0), 2.0) == pytest.approx(-2.0, abs=1e-15)
        assert gamma_log_pdf(GammaParam(2.0, 1.0), 1.0) == pytest.approx(-1.0, abs=1e-15)
        assert gamma_log_pdf(GammaParam(3.5, 0.7), 4.2) == pytest.approx(ov.GAMMA_3_5_0_7_AT_4_2, abs=1e-13)
        with pytest.raises(DomainError):
            gamma_log_pdf(GammaParam(1.0, 1.0), 0.0)

    def test_negbin(self):
        assert negbin_log_pmf(NegBinParam(2.0, 0.5), 0) == pytest.approx(2 * math.log(0.5), abs=1e-15)
        assert negbin_log_pmf(NegBinParam(1.0, 0.3), 3) == pytest.approx(math.log(0.3**3 * 0.7), abs=1e-14)
        assert negbin_log_pmf(NegBinParam(0.5, 0.9), 12) == pytest.approx(ov.NEGBIN_0_5_0_9_AT_12, abs=1e-13)
        with pytest.raises(DomainError):
            negbin_log_pmf(NegBinParam(1.0, 0.5), -2)

    def test_vectorized(self):
        xs = np.arange(10)
        vals = negbin_log_pmf(NegBinParam(1.5, 0.4), xs)
        assert vals == pytest.approx([negbin_log_pmf(NegBinParam(1.5, 0.4), int(x)) for x in xs])

    def test_dirichlet(self):
        assert dirichlet_log_pdf(DirichletParam((1.0, 1.0)), (0.3, 0.7)) == pytest.approx(0.0, abs=1e-15)
        assert dirichlet_log_pdf(DirichletParam((1.0, 1.0, 1.0)), (0.2, 0.3, 0.5)) == pytest.approx(math.log(2))
        assert dirichlet_log_pdf(DirichletParam((2.0, 3.0)), (0.4, 0.6)) == pytest.approx(
            math.log(12 * 0.4 * 0.36), abs=1e-14)

    def test_dirichlet_boundary(self):
        assert dirichlet_log_pdf(DirichletParam((1.0, 2.0)), (0.0, 1.0)) == pytest.approx(math.log(2))
        assert dirichlet_log_pdf(DirichletParam((2.0, 2.0)), (0.0, 1.0)) == -math.inf
        with pytest.raises(BoundaryDensityError):
            dirichlet_log_pdf(DirichletParam((0.5, 2.0)), (0.0, 1.0))
        with pytest.raises(DimensionMismatchError):
            dirichlet_log_pdf(DirichletParam((1.0, 1.0)), (0.2, 0.3, 0.5))

    def test_multinomial(self):
        p = MultinomialParam(2, (0.5, 0.5))
        assert multinomial_log_pmf(p, (1, 1)) == pytest.approx(math.log(0.5), abs=1e-15)
        assert multinomial_log_pmf(MultinomialParam(0, (0.2, 0.8)), (0, 0)) == 0.0
        val = multinomial_log_pmf(MultinomialParam(5, (0.2, 0.3, 0.5)), (1, 2, 2))
        assert val == pytest.approx(math.log(ov.MULTINOMIAL_EXAMPLE), abs=1e-14)

    def test_multinomial_zero_probability_cells(self):
        p = MultinomialParam(2, (0.0, 1.0))
        assert multinomial_log_pmf(p, (0, 2)) == 0.0
        assert multinomial_log_pmf(p, (1, 1)) == -math.inf

    def test_multinomial_errors(self):
        p = MultinomialParam(3, (0.5, 0.5))
        with pytest.raises(TotalMismatchError):
            multinomial_log_pmf(p, (1, 1))
        with pytest.raises(DimensionMismatchError):
            multinomial_log_pmf(p, (1, 1, 1))

    def test_dirmult(self):
        assert dirmult_log_pmf(DirMultParam(1, (1.0, 1.0)), (1, 0)) == pytest.approx(math.log(0.5), abs=1e-15)
        for k in range(4):
            assert dirmult_log_pmf(DirMultParam(3, (1.0, 1.0)), (k, 3 - k)) == pytest.approx(
                math.log(0.25), abs=1e-14)
        val = dirmult_log_pmf(DirMultParam(4, (2.0, 3.0, 0.5)), (1, 2, 1))
        assert val == pytest.approx(math.log(ov.DIRMULT_EXAMPLE), abs=1e-14)
        with pytest.raises(TotalMismatchError):
            dirmult_log_pmf(DirMultParam(4, (1.0, 1.0)), (1, 1))


UNIVARIATE_GRID = [PoissonParam(0.01), PoissonParam(3.0), PoissonParam(250.0),
                   NegBinParam(0.1, 0.95), NegBinParam(2.0, 0.5), NegBinParam(50.0, 0.1)]


class TestNormalization:
    @pytest.mark.parametrize("param", UNIVARIATE_GRID, ids=repr)
    def test_unbounded_support(self, param):
        k = len(truncated_support(param))
        xs = np.arange(k)
        lp = poisson_log_pmf(param, xs) if isinstance(param, PoissonParam) else negbin_log_pmf(param, xs)
        total = math.fsum(np.exp(lp))
        assert 1 - 1e-8 <= total <= 1.0

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("m", range(7))
    def test_bounded_support(self, n, m):
        probs = np.arange(1, n + 1) / (n * (n + 1) / 2)
        alphas = np.linspace(0.3, 4.0, n)
        mp_ = MultinomialParam(m, probs)
        dp = DirMultParam(m, alphas)
        outcomes = list(enumerate_counts(m, n))
        assert math.fsum(math.exp(multinomial_log_pmf(mp_, x)) for x in outcomes) == pytest.approx(1.0, abs=1e-12)
        assert math.fsum(math.exp(dirmult_log_pmf(dp, x)) for x in outcomes) == pytest.approx(1.0, abs=1e-12)


class TestMoments:
    def test_examples(self):
        assert moments(NegBinParam(2.0, 0.5)).mean == pytest.approx(2.0)
        assert moments(DirichletParam((1.0, 1.0, 2.0))).mean == pytest.approx((0.25, 0.25, 0.5))
        assert moments(DirMultParam(10, (1.0, 3.0))).mean == pytest.approx((2.5, 7.5))

    def test_negbin_variance_formula(self):
        p = negbin_from_mean(2.0, 5.0)
        assert moments(p).variance == pytest.approx(5.0 + 25.0 / 2.0)

    @pytest.mark.parametrize("alpha,mu", [(2.0, 5.0), (0.5, 1.0), (10.0, 0.3)])
    def test_negbin_monte_carlo(self, alpha, mu):
        p = negbin_from_mean(alpha, mu)
        n = 100_000
        x = sample_negbin(RngStream(11, 2), p, n).astype(float)
        mean, var = mu, mu + mu * mu / alpha
        assert abs(x.mean() - mean) <= 4 * math.sqrt(var / n)
        # standard error of the sample variance from the fourth central moment
        m4 = np.mean((x - x.mean()) ** 4)
        assert abs(x.var(ddof=1) - var) <= 4 * math.sqrt((m4 - var**2) / n)


def test_poisson_limit_monotone():
    mu = 4.0
    xs = np.arange(int(10 * mu) + 1)
    target = poisson_log_pmf(PoissonParam(mu), xs)
    gaps = [np.max(np.abs(negbin_log_pmf(negbin_from_mean(a, mu), xs) - target)) for a in (1e3, 1e6)]
    assert gaps[1] < gaps[0]
