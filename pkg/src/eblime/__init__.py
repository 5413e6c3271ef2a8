"""Local surrogate explanations with calibrated uncertainty.

The package fits a weighted ridge surrogate to black-box predictions over
binary feature masks and, unlike point-estimate explainers, treats the
ridge parameter as a random variable so the reported feature-importance
intervals remain calibrated as the perturbation budget grows.
"""

from .baselines import BaselineConfig, explain_bayeslime, explain_lime
from .blackbox import (
    BlackBoxHandle,
    BuiltinModel,
    SubprocessModel,
    make_defect_model,
    make_linear_model,
    make_logistic_model,
    make_mean_mask_model,
    make_rough_logistic_model,
    predict_batch,
    resolve_builtin,
)
from .errors import (
    AdapterProtocolError,
    EblimeError,
    InvalidInputError,
    NumericDegeneracyError,
    StateError,
)
from .estimators import BayesLimeExplainer, EblimeExplainer, LimeExplainer
from .evaluation import (
    CoverageReport,
    LocalizationReport,
    Scenario,
    make_defect_suite,
    make_synthetic_suite,
    run_coverage_experiment,
    run_lambda_study,
    run_localization_experiment,
    top_k_segments,
)
from .linalg import (
    RidgeSolution,
    SufficientStats,
    WeightedDesign,
    compute_sufficient_stats,
    marginal_logdet,
    marginal_quad_form,
    solve_ridge,
)
from .oracle import enumerate_masks, ground_truth_beta, ground_truth_beta_sampled
from .perturbation import (
    FeatureSpace,
    KernelConfig,
    PerturbationSet,
    apply_mask,
    build_perturbation_set,
    generate_masks,
    grid_segment,
    kernel_weights,
)
from .posterior import (
    Explanation,
    LambdaGrid,
    PriorConfig,
    explain_eblime,
    grid_posterior,
    gumbel_sample_lambda,
    lambda_log_prior,
    lambda_posterior_mean,
    sample_beta,
    sample_noise_variance,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterProtocolError",
    "BaselineConfig",
    "BayesLimeExplainer",
    "BlackBoxHandle",
    "BuiltinModel",
    "CoverageReport",
    "EblimeError",
    "EblimeExplainer",
    "Explanation",
    "FeatureSpace",
    "InvalidInputError",
    "KernelConfig",
    "LambdaGrid",
    "LimeExplainer",
    "LocalizationReport",
    "NumericDegeneracyError",
    "PerturbationSet",
    "PriorConfig",
    "RidgeSolution",
    "Scenario",
    "StateError",
    "SubprocessModel",
    "SufficientStats",
    "WeightedDesign",
    "apply_mask",
    "build_perturbation_set",
    "compute_sufficient_stats",
    "enumerate_masks",
    "explain_bayeslime",
    "explain_eblime",
    "explain_lime",
    "generate_masks",
    "grid_posterior",
    "grid_segment",
    "ground_truth_beta",
    "ground_truth_beta_sampled",
    "gumbel_sample_lambda",
    "kernel_weights",
    "lambda_log_prior",
    "lambda_posterior_mean",
    "make_defect_model",
    "make_defect_suite",
    "make_linear_model",
    "make_logistic_model",
    "make_mean_mask_model",
    "make_rough_logistic_model",
    "make_synthetic_suite",
    "marginal_logdet",
    "marginal_quad_form",
    "predict_batch",
    "resolve_builtin",
    "run_coverage_experiment",
    "run_lambda_study",
    "run_localization_experiment",
    "sample_beta",
    "sample_noise_variance",
    "solve_ridge",
    "top_k_segments",
]
