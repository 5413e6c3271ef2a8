"""Exhaustive ground-truth feature importance.

The reference importance of a deterministic model is the weighted ridge
solution over the complete enumeration of all 2^p masks; a sampled variant
mirrors the common practice of approximating it with a large random
perturbation set instead.
"""

from __future__ import annotations

import numpy as np

from .baselines import explain_lime
from .blackbox import BlackBoxHandle, predict_batch
from .errors import InvalidInputError
from .linalg import SufficientStats, solve_ridge
from .perturbation import (
    FeatureSpace,
    KernelConfig,
    apply_mask,
    build_perturbation_set,
    kernel_weights,
)

ENUMERATION_CAP = 20
_CHUNK = 4096


def enumerate_masks(p: int) -> np.ndarray:
    """All 2^p binary masks, ordered by the integer value of the mask read
    as a binary number with bit j = feature j."""
    if p < 1:
        raise InvalidInputError("need p >= 1")
    if p > ENUMERATION_CAP:
        raise InvalidInputError(
            f"exhaustive enumeration is capped at p <= {ENUMERATION_CAP} "
            f"(2^{ENUMERATION_CAP} predictions); got p={p}"
        )
    ints = np.arange(1 << p, dtype=np.int64)[:, None]
    return ((ints >> np.arange(p)[None, :]) & 1).astype(np.float64)


def _stats_from_masks(
    space: FeatureSpace,
    handle: BlackBoxHandle,
    cfg: KernelConfig,
    masks: np.ndarray,
    original: np.ndarray | None,
) -> SufficientStats:
    """Accumulate sufficient statistics over mask chunks in a fixed order."""
    p = space.p
    gram = np.zeros((p, p))
    xy = np.zeros(p)
    yy = 0.0
    sum_log_w = 0.0
    for start in range(0, masks.shape[0], _CHUNK):
        chunk = masks[start : start + _CHUNK]
        weights = kernel_weights(chunk, cfg)
        if space.kind == "abstract-mask":
            instances = chunk
        else:
            instances = np.stack([apply_mask(space, original, m) for m in chunk])
        responses = predict_batch(handle, instances)
        wz = chunk * weights[:, None]
        gram += chunk.T @ wz
        xy += chunk.T @ (weights * responses)
        yy += float(np.dot(responses, weights * responses))
        sum_log_w += float(np.log(weights).sum())
    gram = 0.5 * (gram + gram.T)
    return SufficientStats(
        gram=gram, xy=xy, yy=yy, sum_log_weights=sum_log_w, n=masks.shape[0], p=p
    )


def ground_truth_beta(
    space: FeatureSpace,
    handle: BlackBoxHandle,
    cfg: KernelConfig,
    fixed_lambda: float = 1.0,
    original: np.ndarray | None = None,
) -> np.ndarray:
    """Exact reference importance from the full 2^p mask enumeration.

    Deterministic: no randomness enters anywhere. ``original`` is required
    for segmented-image spaces and ignored for abstract ones.
    """
    masks = enumerate_masks(space.p)
    stats = _stats_from_masks(space, handle, cfg, masks, original)
    return solve_ridge(stats, fixed_lambda).beta_hat


def ground_truth_beta_sampled(
    space: FeatureSpace,
    handle: BlackBoxHandle,
    cfg: KernelConfig,
    fixed_lambda: float,
    n: int,
    seed: int,
    original: np.ndarray | None = None,
) -> np.ndarray:
    """Reference importance from a size-n random perturbation set.

    This follows the usual operational protocol (a large sampled LIME run
    standing in for the exact enumeration).
    """
    if n < 1:
        raise InvalidInputError("need n >= 1")
    pset = build_perturbation_set(space, original, handle, n, seed, kernel=cfg)
    return explain_lime(pset.to_design(), fixed_lambda=fixed_lambda).beta_mean
