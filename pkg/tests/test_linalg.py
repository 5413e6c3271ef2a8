"""Sufficient statistics, ridge solves and the Woodbury-route marginals,
each checked against naive dense computations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eblime import (
    InvalidInputError,
    WeightedDesign,
    compute_sufficient_stats,
    marginal_logdet,
    marginal_quad_form,
    solve_ridge,
)

from conftest import dense_marginal, random_design


class TestWeightedDesign:
    def test_rejects_non_binary_masks(self):
        with pytest.raises(InvalidInputError):
            WeightedDesign(masks=np.array([[0.5]]), weights=np.ones(1), responses=np.zeros(1))

    def test_rejects_nonpositive_weights(self):
        with pytest.raises(InvalidInputError):
            WeightedDesign(masks=np.ones((2, 2)), weights=np.array([1.0, 0.0]), responses=np.zeros(2))

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            WeightedDesign(masks=np.ones((2, 2)), weights=np.ones(2), responses=np.array([0.0, np.nan]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            WeightedDesign(masks=np.ones((2, 2)), weights=np.ones(3), responses=np.zeros(2))


class TestSufficientStats:
    def test_zero_design(self):
        design = WeightedDesign(
            masks=np.zeros((5, 3)), weights=np.ones(5), responses=np.linspace(0, 1, 5)
        )
        stats = compute_sufficient_stats(design)
        assert np.all(stats.gram == 0.0)
        assert np.all(stats.xy == 0.0)
        assert stats.yy == pytest.approx(np.sum(design.responses**2), abs=0)

    def test_identity_design(self):
        design = WeightedDesign(masks=np.eye(3), weights=np.ones(3), responses=np.array([1.0, 2.0, 3.0]))
        stats = compute_sufficient_stats(design)
        np.testing.assert_array_equal(stats.gram, np.eye(3))
        np.testing.assert_array_equal(stats.xy, [1.0, 2.0, 3.0])
        assert stats.yy == 14.0

    def test_matches_naive_triple_loop(self, rng):
        design = random_design(rng, 6, 4)
        stats = compute_sufficient_stats(design)
        n, p = 6, 4
        gram = np.zeros((p, p))
        xy = np.zeros(p)
        yy = 0.0
        for i in range(n):
            for j in range(p):
                xy[j] += design.masks[i, j] * design.weights[i] * design.responses[i]
                for k in range(p):
                    gram[j, k] += design.masks[i, j] * design.weights[i] * design.masks[i, k]
            yy += design.weights[i] * design.responses[i] ** 2
        assert np.allclose(stats.gram, gram, rtol=1e-12)
        assert np.allclose(stats.xy, xy, rtol=1e-12)
        assert np.isclose(stats.yy, yy, rtol=1e-12)

    def test_gram_exactly_symmetric(self, rng):
        stats = compute_sufficient_stats(random_design(rng, 40, 7))
        np.testing.assert_array_equal(stats.gram, stats.gram.T)


class TestSolveRidge:
    def test_zero_response_gives_zero_beta(self, rng):
        design = random_design(rng, 10, 4)
        design = WeightedDesign(design.masks, design.weights, np.zeros(10))
        sol = solve_ridge(compute_sufficient_stats(design), 0.7)
        np.testing.assert_array_equal(sol.beta_hat, np.zeros(4))

    def test_identity_design_closed_form(self):
        y = np.array([0.2, 0.9, 0.4, 1.0])
        design = WeightedDesign(masks=np.eye(4), weights=np.ones(4), responses=y)
        sol = solve_ridge(compute_sufficient_stats(design), 1.0)
        np.testing.assert_allclose(sol.beta_hat, y / 2.0, rtol=1e-14)

    def test_matches_dense_lu_solve(self, rng):
        design = random_design(rng, 8, 5)
        stats = compute_sufficient_stats(design)
        sol = solve_ridge(stats, 0.3)
        expected = np.linalg.solve(stats.gram + 0.3 * np.eye(5), stats.xy)
        np.testing.assert_allclose(sol.beta_hat, expected, rtol=1e-10)

    def test_beta_is_cov_times_xy_by_construction(self, rng):
        stats = compute_sufficient_stats(random_design(rng, 20, 6))
        sol = solve_ridge(stats, 0.5)
        np.testing.assert_array_equal(sol.beta_hat, sol.cov_unit @ stats.xy)

    def test_rejects_nonpositive_lambda(self, small_stats):
        with pytest.raises(InvalidInputError):
            solve_ridge(small_stats, 0.0)
        with pytest.raises(InvalidInputError):
            solve_ridge(small_stats, -1.0)

    def test_shrinkage_monotone_and_vanishing(self, rng):
        stats = compute_sufficient_stats(random_design(rng, 30, 6))
        lams = [0.01, 0.1, 1.0, 10.0, 1e4]
        norms = [np.linalg.norm(solve_ridge(stats, lam).beta_hat) for lam in lams]
        assert all(a >= b for a, b in zip(norms, norms[1:]))
        huge = solve_ridge(stats, 1e8).beta_hat
        assert np.linalg.norm(huge) < 1e-6 * np.linalg.norm(stats.xy)

    def test_positive_definite_down_to_tiny_lambda(self, rng):
        masks = rng.integers(0, 2, size=(10, 5)).astype(float)
        design = WeightedDesign(masks=masks, weights=np.ones(10), responses=rng.uniform(size=10))
        stats = compute_sufficient_stats(design)
        sol = solve_ridge(stats, 1e-12)
        # Cholesky of cov_unit must succeed: every pivot positive
        factor = sol.scale_factor()
        assert np.all(np.diag(factor) > 0)


class TestMarginalLogdet:
    def test_scalar_case(self):
        design = WeightedDesign(masks=np.ones((1, 1)), weights=np.ones(1), responses=np.ones(1))
        stats = compute_sufficient_stats(design)
        assert marginal_logdet(stats, 1.0) == pytest.approx(np.log(2.0), abs=1e-14)

    def test_zero_design_reduces_to_weights(self, rng):
        weights = rng.uniform(0.2, 2.0, size=7)
        design = WeightedDesign(masks=np.zeros((7, 3)), weights=weights, responses=rng.uniform(size=7))
        stats = compute_sufficient_stats(design)
        assert marginal_logdet(stats, 0.4) == pytest.approx(-np.log(weights).sum(), abs=1e-12)

    def test_matches_dense_assembly(self, rng):
        design = random_design(rng, 10, 4)
        stats = compute_sufficient_stats(design)
        for lam in (0.05, 0.5, 3.0):
            _, dense = np.linalg.slogdet(dense_marginal(design, lam))
            assert marginal_logdet(stats, lam) == pytest.approx(dense, abs=1e-8)


class TestMarginalQuadForm:
    def test_zero_response(self, rng):
        design = random_design(rng, 9, 3)
        design = WeightedDesign(design.masks, design.weights, np.zeros(9))
        stats = compute_sufficient_stats(design)
        assert marginal_quad_form(stats, 0.8, 1.5) == pytest.approx(3.0, abs=0)

    def test_scalar_arithmetic(self):
        design = WeightedDesign(masks=np.ones((1, 1)), weights=np.ones(1), responses=np.array([2.0]))
        stats = compute_sufficient_stats(design)
        # marginal shape is 1 + 1/1 = 2; quadratic form 4/2 = 2; plus 2b = 4
        assert marginal_quad_form(stats, 1.0, 1.0) == pytest.approx(4.0, abs=1e-14)

    def test_matches_dense_assembly(self, rng):
        design = random_design(rng, 12, 5)
        stats = compute_sufficient_stats(design)
        for lam in (0.1, 1.0, 2.5):
            dense = design.responses @ np.linalg.solve(dense_marginal(design, lam), design.responses)
            got = marginal_quad_form(stats, lam, 0.7)
            assert got == pytest.approx(dense + 1.4, rel=1e-8)

    def test_bounds(self, rng):
        for trial in range(20):
            design = random_design(rng, int(rng.integers(2, 16)), int(rng.integers(1, 8)))
            stats = compute_sufficient_stats(design)
            for lam in (0.01, 0.3, 2.0, 50.0):
                q = marginal_quad_form(stats, lam, 0.25)
                assert 0.5 < q <= stats.yy + 0.5 + 1e-12
                if np.any(design.responses != 0):
                    assert q > 0.5


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=16),
    p=st.integers(min_value=1, max_value=8),
    lam=st.floats(min_value=1e-3, max_value=100.0),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_woodbury_equivalence_property(n, p, lam, seed):
    """Woodbury-route quantities equal the dense N x N computations for any
    small instance."""
    rng = np.random.default_rng(seed)
    design = random_design(rng, n, p)
    stats = compute_sufficient_stats(design)
    dense = dense_marginal(design, lam)
    _, dense_logdet = np.linalg.slogdet(dense)
    assert marginal_logdet(stats, lam) == pytest.approx(dense_logdet, abs=1e-8)
    dense_quad = design.responses @ np.linalg.solve(dense, design.responses)
    assert marginal_quad_form(stats, lam, 0.0) == pytest.approx(dense_quad, rel=1e-8, abs=1e-10)
