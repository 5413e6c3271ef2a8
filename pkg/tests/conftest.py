import numpy as np
import pytest

from eblime import WeightedDesign, compute_sufficient_stats


def random_design(rng, n, p, theta=2.0):
    """Random binary design with kernel-style weights and bounded responses."""
    masks = rng.integers(0, 2, size=(n, p)).astype(float)
    masks[0] = 1.0
    zeros = (masks == 0).sum(axis=1)
    weights = np.exp(-zeros / theta**2)
    responses = rng.uniform(0.0, 1.0, size=n)
    return WeightedDesign(masks=masks, weights=weights, responses=responses)


def dense_marginal(design, lam):
    """N x N marginal covariance shape, assembled explicitly (test oracle)."""
    z = design.masks
    return np.diag(1.0 / design.weights) + (1.0 / lam) * (z @ z.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_stats(rng):
    return compute_sufficient_stats(random_design(rng, 12, 4))
