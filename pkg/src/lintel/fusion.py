"""Ensemble weights and fusion of Gaussian predictives.

Weights follow Bayesian model averaging with a forgetting exponent: before
each prediction the previous weights are raised to the power ``alpha`` and
renormalized, and after the observation they are multiplied by each
model's predictive density. All weight arithmetic is done on logs and every
result is floored at ``WEIGHT_FLOOR`` so that no model can be lost to
underflow.
"""

import enum
import math
from typing import Sequence

import numpy as np

from lintel.errors import DegenerateLikelihoodError
from lintel.markov_gp import PredictiveDistribution

WEIGHT_FLOOR = 1e-10


class FusionRule(str, enum.Enum):
    ARITHMETIC = "arithmetic"  # mixture of experts, moment matched
    GEOMETRIC = "geometric"  # generalized product of experts


def _normalize_log(log_w: np.ndarray) -> np.ndarray:
    w = np.exp(log_w - log_w.max())
    w /= w.sum()
    np.maximum(w, WEIGHT_FLOOR, out=w)
    w /= w.sum()
    return w


def regularize(w) -> np.ndarray:
    """Floor every weight at ``WEIGHT_FLOOR`` and renormalize."""
    w = np.maximum(np.asarray(w, dtype=float), WEIGHT_FLOOR)
    return w / w.sum()


def uniform_weights(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def forget(w, alpha: float) -> np.ndarray:
    """Flatten weights toward uniform: ``w_k^alpha``, renormalized."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"forgetting factor must lie in [0, 1], got {alpha}")
    return _normalize_log(alpha * np.log(np.asarray(w, dtype=float)))


def bayes_update(w_tilde, log_liks) -> np.ndarray:
    """Multiply weights by predictive likelihoods given as log-densities."""
    log_post = np.log(w_tilde) + log_liks
    if not np.isfinite(log_post.max()):
        raise DegenerateLikelihoodError("no candidate gave a finite positive density to the observation")
    return _normalize_log(log_post)


def gaussian_logpdf(y: float, mean, variance):
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    return -0.5 * (np.log(2.0 * math.pi * variance) + (y - mean) ** 2 / variance)


def fuse(preds: Sequence[PredictiveDistribution], w_tilde, rule: FusionRule) -> PredictiveDistribution:
    """Pool K Gaussian predictives into one Gaussian.

    Arithmetic pooling moment-matches the weighted mixture; geometric
    pooling takes the weighted product of densities, in which precisions add.
    """
    means = np.fromiter((p.mean for p in preds), float, len(preds))
    variances = np.fromiter((p.variance for p in preds), float, len(preds))
    return fuse_arrays(means, variances, np.asarray(w_tilde, dtype=float), FusionRule(rule))


def _clip_to_hull(mean: float, means: np.ndarray) -> float:
    # rounding can push a convex combination just outside the hull
    return min(max(mean, float(means.min())), float(means.max()))


def fuse_arrays(means: np.ndarray, variances: np.ndarray, w: np.ndarray, rule: FusionRule) -> PredictiveDistribution:
    if rule is FusionRule.ARITHMETIC:
        mean = _clip_to_hull(float(w @ means), means)
        spread = (means - mean) ** 2
        return PredictiveDistribution(mean, float(w @ (variances + spread)))
    precisions = w / variances
    total = float(precisions.sum())
    mean = _clip_to_hull(float(precisions @ means) / total, means)
    return PredictiveDistribution(mean, 1.0 / total)
