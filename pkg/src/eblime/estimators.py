"""Estimator-style wrappers around the explanation methods.

These follow the scikit-learn conventions (constructor stores parameters,
``fit`` validates and computes, fitted attributes carry a trailing
underscore, ``get_params``/``set_params`` come from BaseEstimator), so an
explainer can be cloned, grid-searched or dropped into a pipeline that
already produces binary mask designs, responses and locality weights.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .baselines import BaselineConfig, explain_bayeslime, explain_lime
from .linalg import WeightedDesign
from .posterior import PriorConfig, explain_eblime


class _MaskRegressionMixin:
    def _validate(self, X, y, sample_weight):
        X = check_array(X, dtype=np.float64)
        y = check_array(y, ensure_2d=False, dtype=np.float64)
        if sample_weight is None:
            sample_weight = np.ones(X.shape[0])
        sample_weight = check_array(sample_weight, ensure_2d=False, dtype=np.float64)
        check_consistent_length(X, y, sample_weight)
        return WeightedDesign(masks=X, weights=sample_weight, responses=y)

    def predict(self, X):
        """Local surrogate prediction: X @ coef_."""
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_

    def _store(self, explanation):
        self.explanation_ = explanation
        self.beta_mean_ = explanation.beta_mean
        self.coef_ = explanation.beta_mean
        self.beta_cov_ = explanation.beta_cov
        self.ci_lower_ = explanation.ci_lower
        self.ci_upper_ = explanation.ci_upper
        self.n_features_in_ = explanation.beta_mean.size
        return self


class LimeExplainer(_MaskRegressionMixin, BaseEstimator):
    """Weighted ridge point-estimate explainer (no uncertainty)."""

    def __init__(self, fixed_lambda: float = 1.0):
        self.fixed_lambda = fixed_lambda

    def fit(self, X, y, sample_weight=None):
        design = self._validate(X, y, sample_weight)
        return self._store(explain_lime(design, fixed_lambda=self.fixed_lambda))


class BayesLimeExplainer(_MaskRegressionMixin, BaseEstimator):
    """Fixed-ridge Bayesian explainer with sampled credible intervals."""

    def __init__(
        self,
        fixed_lambda: float = 1.0,
        a: float = 1e-6,
        b: float = 1e-6,
        samples: int = 2_500,
        ci_level: float = 0.95,
        random_state: int = 0,
    ):
        self.fixed_lambda = fixed_lambda
        self.a = a
        self.b = b
        self.samples = samples
        self.ci_level = ci_level
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        design = self._validate(X, y, sample_weight)
        cfg = BaselineConfig(
            method="bayeslime",
            fixed_lambda=self.fixed_lambda,
            a=self.a,
            b=self.b,
            samples=self.samples,
            ci_level=self.ci_level,
        )
        return self._store(explain_bayeslime(design, cfg, seed=self.random_state))


class EblimeExplainer(_MaskRegressionMixin, BaseEstimator):
    """Random-ridge Bayesian explainer; also exposes the ridge posterior
    mean as ``lambda_posterior_mean_`` after fitting."""

    def __init__(
        self,
        a: float = 1.0,
        b: float = 1.0,
        grid_max: float = 1.0,
        grid_size: int = 20_000,
        samples: int = 2_500,
        ci_level: float = 0.95,
        random_state: int = 0,
    ):
        self.a = a
        self.b = b
        self.grid_max = grid_max
        self.grid_size = grid_size
        self.samples = samples
        self.ci_level = ci_level
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        design = self._validate(X, y, sample_weight)
        prior = PriorConfig(
            a=self.a,
            b=self.b,
            grid_max=self.grid_max,
            grid_size=self.grid_size,
            samples=self.samples,
            ci_level=self.ci_level,
        )
        explanation = explain_eblime(design, prior, seed=self.random_state)
        self._store(explanation)
        self.lambda_posterior_mean_ = explanation.lambda_posterior_mean
        return self
