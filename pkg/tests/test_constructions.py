import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from countlab.constructions import (
    EquivalenceResult,
    build_jacobian,
    conditioned_negbins_heterogeneous,
    dirichlet_density_via_gamma_construction,
    dirmult_via_conditioned_negbins,
    jacobian_determinant,
    multinomial_via_conditioned_poissons,
    negbin_via_poisson_gamma,
    negbin_via_poisson_gamma_log,
)
from countlab.dist_core import (
    DirichletParam,
    DirMultParam,
    MultinomialParam,
    dirichlet_log_pdf,
    dirmult_log_pmf,
    enumerate_counts,
    multinomial_log_pmf,
    negbin_from_mean,
    negbin_log_pmf,
)
from countlab.errors import DimensionMismatchError, DomainError


def test_equivalence_result_contract():
    ok = EquivalenceResult.compare(1.0, 1.0 + 1e-13, 1e-12)
    assert ok.passed and ok.abs_diff == pytest.approx(1e-13, rel=1e-3)
    assert not EquivalenceResult.compare(1.0, 1.1, 1e-12).passed


class TestPoissonGamma:
    def test_examples(self):
        assert negbin_via_poisson_gamma(1.0, 1.0, 0) == pytest.approx(0.5, rel=1e-12)
        assert negbin_via_poisson_gamma(2.0, 2.0, 0) == pytest.approx(0.25, rel=1e-12)

    def test_matches_closed_form(self):
        quad = negbin_via_poisson_gamma(0.7, 3.1, 5)
        closed = math.exp(negbin_log_pmf(negbin_from_mean(0.7, 3.1), 5))
        assert quad == pytest.approx(closed, rel=1e-10)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 5.0])
    @pytest.mark.parametrize("mu", [0.1, 1.0, 10.0])
    def test_grid(self, alpha, mu):
        closed = negbin_log_pmf(negbin_from_mean(alpha, mu), np.arange(51))
        for x in range(51):
            rel = abs(math.expm1(negbin_via_poisson_gamma_log(alpha, mu, x) - closed[x]))
            assert rel <= 1e-8

    def test_extreme_tail_stays_in_log_space(self):
        # probability far below the float64 range of a linear-space integral
        alpha, mu, x = 0.5, 0.1, 400
        closed = negbin_log_pmf(negbin_from_mean(alpha, mu), x)
        assert closed < -700
        assert negbin_via_poisson_gamma_log(alpha, mu, x) == pytest.approx(closed, abs=1e-8)


class TestConditionedPoissons:
    def test_examples(self):
        assert multinomial_via_conditioned_poissons((1.0, 1.0), (1, 1)) == pytest.approx(math.log(0.5), abs=1e-15)
        for c in (0.01, 1.0, 100.0):
            assert multinomial_via_conditioned_poissons((c, c, c), (0, 0, 0)) == pytest.approx(0.0, abs=1e-14)

    def test_matches_multinomial_and_scale(self):
        x = (1, 2, 2)
        ref = multinomial_log_pmf(MultinomialParam(5, (0.2, 0.3, 0.5)), x)
        assert multinomial_via_conditioned_poissons((2.0, 3.0, 5.0), x) == pytest.approx(ref, abs=1e-12)
        assert multinomial_via_conditioned_poissons((4.0, 6.0, 10.0), x) == pytest.approx(ref, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            multinomial_via_conditioned_poissons((1.0, 1.0), (1, 1, 1))

    @settings(max_examples=50)
    @given(st.lists(st.floats(0.05, 20.0), min_size=2, max_size=4), st.integers(0, 6),
           st.sampled_from([0.1, 10.0]))
    def test_property(self, lam, m, c):
        lam = np.array(lam)
        param = MultinomialParam(m, lam / lam.sum())
        for x in enumerate_counts(m, lam.size):
            lhs = multinomial_via_conditioned_poissons(lam, x)
            assert lhs == pytest.approx(multinomial_log_pmf(param, x), abs=1e-12)
            assert multinomial_via_conditioned_poissons(c * lam, x) == pytest.approx(lhs, abs=1e-12)


class TestConditionedNegBins:
    def test_examples(self):
        assert dirmult_via_conditioned_negbins((1.0, 1.0), 0.5, (1, 0)) == pytest.approx(math.log(0.5), abs=1e-15)
        a = dirmult_via_conditioned_negbins((1.0, 1.0), 0.1, (2, 1))
        b = dirmult_via_conditioned_negbins((1.0, 1.0), 0.9, (2, 1))
        assert abs(a - b) <= 1e-12
        ref = dirmult_log_pmf(DirMultParam(4, (2.0, 3.0, 0.5)), (1, 2, 1))
        assert dirmult_via_conditioned_negbins((2.0, 3.0, 0.5), 0.37, (1, 2, 1)) == pytest.approx(ref, abs=1e-12)

    @settings(max_examples=50)
    @given(st.lists(st.floats(0.05, 20.0), min_size=2, max_size=4), st.integers(0, 6))
    def test_property(self, alphas, m):
        param = DirMultParam(m, alphas)
        for x in enumerate_counts(m, len(alphas)):
            ref = dirmult_log_pmf(param, x)
            for theta in (0.1, 0.5, 0.9):
                assert dirmult_via_conditioned_negbins(alphas, theta, x) == pytest.approx(ref, abs=1e-12)

    def test_heterogeneous_theta_breaks_invariance(self):
        a = conditioned_negbins_heterogeneous((1.0, 1.0), (0.3, 0.7), (2, 1))
        b = conditioned_negbins_heterogeneous((1.0, 1.0), (0.5, 0.5), (2, 1))
        assert abs(a - b) > 1e-3
        # equal thetas reduce to the closed form
        assert b == pytest.approx(dirmult_log_pmf(DirMultParam(3, (1.0, 1.0)), (2, 1)), abs=1e-12)


class TestJacobian:
    def test_entries(self):
        assert np.array_equal(build_jacobian((0.3,), 2.0).entries, [[2.0, 0.3], [-2.0, 0.7]])
        assert np.allclose(build_jacobian((0.2, 0.3), 1.0).entries,
                           [[1, 0, 0.2], [0, 1, 0.3], [-1, -1, 0.5]], rtol=0, atol=1e-16)
        assert np.array_equal(build_jacobian((0.5,), 1.0).entries, [[1.0, 0.5], [-1.0, 0.5]])

    def test_sparsity_pattern(self):
        n = 6
        z = np.full(n, 0.1)
        a = build_jacobian(z, 1.7).entries
        wanted = np.zeros((n + 1, n + 1), dtype=bool)
        wanted[np.arange(n), np.arange(n)] = True
        wanted[:, n] = True
        wanted[n, :] = True
        assert np.array_equal(a != 0.0, wanted)

    def test_determinants(self):
        assert jacobian_determinant(build_jacobian((0.3,), 2.0)) == pytest.approx(2.0, rel=1e-15)
        assert jacobian_determinant(build_jacobian((0.2, 0.3), 1.0)) == pytest.approx(1.0, rel=1e-15)
        z = np.random.default_rng(5).dirichlet(np.ones(7))[:6]
        assert jacobian_determinant(build_jacobian(z, 1.7)) == pytest.approx(1.7**6, rel=1e-9)

    @pytest.mark.parametrize("z", [(0.0, 0.5), (0.6, 0.5), (-0.1,), ()])
    def test_rejects_outside_interior(self, z):
        with pytest.raises(DomainError):
            build_jacobian(z, 1.0)

    def test_rejects_bad_y(self):
        with pytest.raises(DomainError):
            build_jacobian((0.3,), 0.0)

    @settings(max_examples=100)
    @given(st.integers(1, 12), st.floats(0.05, 20.0), st.integers(0, 2**32 - 1))
    def test_property(self, n, y, seed):
        z = np.random.default_rng(seed).dirichlet(np.ones(n + 1))[:n]
        if np.any(z <= 0.0) or math.fsum(z) >= 1.0:
            return
        assert jacobian_determinant(build_jacobian(z, y)) == pytest.approx(y**n, rel=1e-9)


class TestDirichletConstruction:
    def test_examples(self):
        assert dirichlet_density_via_gamma_construction((1.0, 1.0), (0.4, 0.6)) == pytest.approx(0.0, abs=1e-10)
        assert dirichlet_density_via_gamma_construction((2.0, 2.0), (0.5, 0.5)) == pytest.approx(math.log(1.5), abs=1e-10)
        alphas, z = (1.3, 2.7, 0.9), (0.2, 0.5, 0.3)
        ref = dirichlet_log_pdf(DirichletParam(alphas), z)
        assert dirichlet_density_via_gamma_construction(alphas, z) == pytest.approx(ref, abs=1e-8)

    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    def test_beta_invariance(self, beta):
        alphas, z = (0.4, 3.0, 7.5, 1.0), (0.1, 0.2, 0.6, 0.1)
        ref = dirichlet_log_pdf(DirichletParam(alphas), z)
        assert dirichlet_density_via_gamma_construction(alphas, z, beta) == pytest.approx(ref, abs=1e-8)

    def test_validation(self):
        with pytest.raises(DimensionMismatchError):
            dirichlet_density_via_gamma_construction((1.0, 1.0, 1.0), (0.5, 0.5))
        with pytest.raises(DomainError):
            dirichlet_density_via_gamma_construction((1.0, 1.0), (0.0, 1.0))
        with pytest.raises(DomainError):
            dirichlet_density_via_gamma_construction((1.0, 1.0), (0.5, 0.5), beta=-1.0)
