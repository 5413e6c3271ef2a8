"""Dense kernels for the weighted ridge posterior.

Everything downstream of a perturbation set reduces to three sufficient
statistics (the weighted Gram matrix, the weighted cross-moment vector and
the weighted response norm), so each ridge-parameter evaluation costs
O(p^3) regardless of how many perturbations were drawn. The N x N marginal
covariance of the responses is never formed; its log-determinant and
quadratic form are obtained through the matrix determinant lemma and the
Woodbury identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import InvalidInputError, NumericDegeneracyError


@dataclass(frozen=True)
class WeightedDesign:
    """One explanation task: binary masks, locality weights and responses.

    masks      : (n, p) array with entries in {0, 1}
    weights    : (n,) strictly positive locality weights
    responses  : (n,) black-box probabilities in [0, 1]
    """

    masks: np.ndarray
    weights: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        masks = np.asarray(self.masks, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        responses = np.asarray(self.responses, dtype=np.float64)
        if masks.ndim != 2 or masks.shape[0] < 1 or masks.shape[1] < 1:
            raise InvalidInputError(f"masks must be a nonempty 2-d array, got shape {masks.shape}")
        n = masks.shape[0]
        if weights.shape != (n,) or responses.shape != (n,):
            raise InvalidInputError(
                f"weights/responses must have shape ({n},), got {weights.shape} and {responses.shape}"
            )
        if not np.isfinite(masks).all() or not np.all((masks == 0.0) | (masks == 1.0)):
            raise InvalidInputError("mask entries must be 0 or 1")
        if not np.isfinite(weights).all() or np.any(weights <= 0.0):
            raise InvalidInputError("weights must be strictly positive and finite")
        if not np.isfinite(responses).all():
            raise InvalidInputError("responses must be finite")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "responses", responses)

    @property
    def n(self) -> int:
        return self.masks.shape[0]

    @property
    def p(self) -> int:
        return self.masks.shape[1]


@dataclass(frozen=True)
class SufficientStats:
    """Weighted moments of a design, computed once and reused per ridge value.

    gram            : (p, p) symmetric PSD, masks' W masks
    xy              : (p,) masks' W responses
    yy              : responses' W responses (scalar, >= 0)
    sum_log_weights : sum of log weights (feeds the marginal log-determinant)
    """

    gram: np.ndarray
    xy: np.ndarray
    yy: float
    sum_log_weights: float
    n: int
    p: int


@dataclass
class RidgeSolution:
    """Ridge point estimate and unit-variance coefficient covariance.

    beta_hat is cov_unit @ xy by construction; cov_unit is
    (gram + lam * I)^-1, symmetric positive definite for lam > 0.
    """

    beta_hat: np.ndarray
    cov_unit: np.ndarray
    lam: float
    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    def scale_factor(self) -> np.ndarray:
        """Lower Cholesky factor of cov_unit, cached after first use."""
        if self._chol is None:
            c, info = lapack.dpotrf(self.cov_unit, lower=1, clean=1)
            if info != 0:
                raise NumericDegeneracyError(
                    f"coefficient covariance not positive definite at lam={self.lam!r} (pivot {info})"
                )
            self._chol = c
        return self._chol


def compute_sufficient_stats(design: WeightedDesign) -> SufficientStats:
    """Reduce a weighted design to its ridge sufficient statistics."""
    z = design.masks
    w = design.weights
    y = design.responses
    wz = z * w[:, None]
    gram = z.T @ wz
    gram = 0.5 * (gram + gram.T)
    xy = z.T @ (w * y)
    yy = float(np.dot(y, w * y))
    return SufficientStats(
        gram=gram,
        xy=xy,
        yy=yy,
        sum_log_weights=float(np.log(w).sum()),
        n=design.n,
        p=design.p,
    )


def _chol_ridged(stats: SufficientStats, lam: float) -> np.ndarray:
    """Lower Cholesky factor of gram + lam * I."""
    a = stats.gram + lam * np.eye(stats.p)
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info != 0:
        raise NumericDegeneracyError(
            f"Cholesky of ridged Gram failed at lam={lam!r} (pivot {info})"
        )
    return c


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0.0:
        raise InvalidInputError(f"ridge parameter must be positive and finite, got {lam!r}")
    return lam


def solve_ridge(stats: SufficientStats, lam: float) -> RidgeSolution:
    """Solve the weighted ridge problem at one ridge value.

    Inverts gram + lam * I from its Cholesky factor; the full inverse is
    materialized because coefficient sampling needs the whole covariance.
    """
    lam = _check_lam(lam)
    c = _chol_ridged(stats, lam)
    inv, info = lapack.dpotri(c, lower=1)
    if info != 0:
        raise NumericDegeneracyError(f"inversion from Cholesky factor failed at lam={lam!r}")
    # dpotri fills one triangle only
    cov = np.tril(inv) + np.tril(inv, -1).T
    cov = 0.5 * (cov + cov.T)
    return RidgeSolution(beta_hat=cov @ stats.xy, cov_unit=cov, lam=lam)


def marginal_logdet(stats: SufficientStats, lam: float) -> float:
    """Log-determinant of the marginal response covariance shape.

    The marginal shape is diag(1/w) + (1/lam) Z Z'; by the matrix
    determinant lemma its log-determinant equals
    -sum(log w) - p log(lam) + log det(gram + lam I), which only needs the
    p x p Cholesky factor.
    """
    lam = _check_lam(lam)
    c = _chol_ridged(stats, lam)
    logdet_ridged = 2.0 * float(np.log(np.diag(c)).sum())
    out = -stats.sum_log_weights - stats.p * np.log(lam) + logdet_ridged
    if not np.isfinite(out):
        raise NumericDegeneracyError(f"non-finite marginal log-determinant at lam={lam!r}")
    return float(out)


def marginal_quad_form(stats: SufficientStats, lam: float, b: float) -> float:
    """Quadratic form of the responses under the marginal shape, plus 2b.

    Woodbury reduces Y' M^-1 Y to yy - xy' (gram + lam I)^-1 xy. The result
    is twice the scale of the inverse-gamma noise-variance conditional and
    lies in (2b, yy + 2b] for nonzero responses.
    """
    lam = _check_lam(lam)
    b = float(b)
    if b < 0.0:
        raise InvalidInputError(f"prior scale b must be nonnegative, got {b!r}")
    c = _chol_ridged(stats, lam)
    t = lapack.dtrtrs(c, stats.xy, lower=1)[0]
    quad = stats.yy - float(np.dot(t, t))
    if quad < -1e-8 * max(stats.yy, 1.0):
        raise NumericDegeneracyError(
            f"negative marginal quadratic form {quad!r} at lam={lam!r}"
        )
    return max(quad, 0.0) + 2.0 * b
