"""Mirrors of the explainer's builtin synthetic models.

These duplicate the in-process closed forms on the other side of the
subprocess boundary so round-trip agreement can be checked end to end.
Kept dependency-free on purpose: the adapter is the reference for wrapping
real models, which bring their own stacks.
"""

from __future__ import annotations

import math


def mean_mask(instances):
    """Prediction = mean of the instance values."""
    return [sum(row) / len(row) for row in instances]


def linear_ramp(p: int):
    """Clipped-linear model with coefficients (1..p) / sum(1..p)."""
    total = p * (p + 1) / 2.0
    coef = [(j + 1) / total for j in range(p)]

    def predict(instances):
        return [min(1.0, max(0.0, sum(c * v for c, v in zip(coef, row)))) for row in instances]

    return predict


def logistic_ramp(p: int, scale: float = 8.0, intercept: float = -4.0):
    """Logistic model over the same ramp coefficients."""
    total = p * (p + 1) / 2.0
    coef = [scale * (j + 1) / total for j in range(p)]

    def predict(instances):
        out = []
        for row in instances:
            logit = intercept + sum(c * v for c, v in zip(coef, row))
            out.append(1.0 / (1.0 + math.exp(-logit)))
        return out

    return predict


def resolve(name: str, p: int):
    """Model registry for the command line."""
    if name == "mean-mask":
        return mean_mask
    if name == "linear":
        return linear_ramp(p)
    if name == "logistic":
        return logistic_ramp(p)
    raise ValueError(f"unknown builtin mirror {name!r} (try mean-mask, linear, logistic)")
