"""LIME point estimates and the fixed-ridge Bayesian baseline.

Both baselines run on the same numerical core as the random-ridge method,
so for equal ridge values all three produce identical point estimates and
unit-variance covariances; the methods differ only in how the ridge
parameter and noise-variance prior are treated.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import WeightedDesign, compute_sufficient_stats, marginal_quad_form, solve_ridge
from .posterior import Explanation, summarize_samples
from .rng import substream


@dataclass(frozen=True)
class BaselineConfig:
    """Fixed-ridge baseline settings.

    The Bayesian baseline keeps the ridge parameter at ``fixed_lambda``
    (coefficients and noise sharing one covariance scale) and uses the
    near-flat a = b = 1e-6 noise-variance prior.
    """

    method: str = "bayeslime"
    fixed_lambda: float = 1.0
    a: float = 1e-6
    b: float = 1e-6
    samples: int = 2_500
    ci_level: float = 0.95

    def __post_init__(self):
        if self.method not in ("lime", "bayeslime"):
            raise InvalidInputError(f"method must be lime or bayeslime, got {self.method!r}")
        if not (np.isfinite(self.fixed_lambda) and self.fixed_lambda > 0):
            raise InvalidInputError(f"fixed_lambda must be positive, got {self.fixed_lambda!r}")
        if not (self.a > 0 and self.b > 0):
            raise InvalidInputError("a and b must be positive")
        if self.samples < 2:
            raise InvalidInputError("samples must be >= 2")
        if not (0.0 < self.ci_level < 1.0):
            raise InvalidInputError(f"ci_level must be in (0, 1), got {self.ci_level!r}")


def explain_lime(design: WeightedDesign, fixed_lambda: float = 1.0) -> Explanation:
    """Weighted ridge point estimate; no uncertainty attached."""
    stats = compute_sufficient_stats(design)
    solution = solve_ridge(stats, fixed_lambda)
    p = stats.p
    return Explanation(
        method="lime",
        beta_mean=solution.beta_hat,
        beta_cov=np.zeros((p, p)),
        config={"fixed_lambda": float(fixed_lambda)},
    )


def explain_bayeslime(
    design: WeightedDesign,
    cfg: BaselineConfig | None = None,
    seed: int = 0,
    sigma2_override: float | None = None,
) -> Explanation:
    """Posterior sampling at a single fixed ridge value.

    Noise variances come from the inverse-gamma conditional at
    ``fixed_lambda``; coefficients from the Gaussian conditional around the
    ridge estimate. ``sigma2_override`` is a test hook that pins the noise
    variance (e.g. to a near-zero value so the intervals collapse onto the
    point estimate).
    """
    cfg = cfg or BaselineConfig()
    stats = compute_sufficient_stats(design)
    lam = cfg.fixed_lambda
    solution = solve_ridge(stats, lam)
    q = marginal_quad_form(stats, lam, cfg.b)
    shape = cfg.a + stats.n / 2.0

    rng_sigma2 = substream(seed, "sigma2")
    rng_beta = substream(seed, "beta")
    if sigma2_override is None:
        sigma2 = (q / 2.0) / rng_sigma2.standard_gamma(shape, size=cfg.samples)
    else:
        if sigma2_override <= 0:
            raise InvalidInputError("sigma2_override must be positive")
        sigma2 = np.full(cfg.samples, float(sigma2_override))
    z = rng_beta.standard_normal((cfg.samples, stats.p))
    beta_samples = solution.beta_hat + np.sqrt(sigma2)[:, None] * (z @ solution.scale_factor().T)

    mean, cov, lower, upper = summarize_samples(beta_samples, cfg.ci_level)
    return Explanation(
        method="bayeslime",
        beta_mean=mean,
        beta_cov=cov,
        beta_samples=beta_samples,
        ci_lower=lower,
        ci_upper=upper,
        seed=seed,
        config=asdict(cfg),
    )
