"""Dense kernel-space GP regression.

Used three ways: as the windowed predictor of the INTEL baseline, as the
brute-force oracle that the state-space filter is checked against, and as
the sampler for synthetic data.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from lintel.errors import NumericalError
from lintel.kernels import KernelSpec, kernel_eval
from lintel.markov_gp import PredictiveDistribution

JITTER_START = 1e-10
JITTER_GROWTH = 10.0
JITTER_RETRIES = 3


@dataclass(frozen=True, eq=False)
class GPDataset:
    times: np.ndarray
    values: np.ndarray
    mean_constant: float = 0.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if times.shape != values.shape:
            raise ValueError(f"{times.size} times but {values.size} values")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mean_constant", float(self.mean_constant))

    def __len__(self):
        return self.times.size

    @property
    def residuals(self) -> np.ndarray:
        return self.values - self.mean_constant


@dataclass(frozen=True, eq=False)
class GPPosteriorCache:
    """Cholesky factor of ``K + noise I`` and ``alpha = (K + noise I)^{-1} delta``."""

    cholesky_factor: np.ndarray
    alpha: np.ndarray
    jitter: float = field(default=0.0)


def gram(spec: KernelSpec, a, b=None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = a if b is None else np.asarray(b, dtype=float)
    return kernel_eval(spec, np.subtract.outer(a, b))


def robust_cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    base = JITTER_START * float(np.mean(np.diag(K)))
    if base <= 0:
        base = JITTER_START
    eye = np.eye(K.shape[0])
    for attempt in range(JITTER_RETRIES):
        jitter = base * JITTER_GROWTH**attempt
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Cholesky failed on {K.shape[0]}x{K.shape[0]} matrix even with jitter {jitter:.3g}; "
        f"diagonal range [{np.min(np.diag(K)):.3g}, {np.max(np.diag(K)):.3g}]"
    )


def gp_fit(spec: KernelSpec, noise_var: float, data: GPDataset) -> GPPosteriorCache:
    if len(data) == 0:
        raise ValueError("cannot fit a GP to an empty dataset")
    if not noise_var > 0:
        raise ValueError(f"noise variance must be positive, got {noise_var}")
    K = gram(spec, data.times)
    K[np.diag_indices_from(K)] += noise_var
    chol, jitter = robust_cholesky(K)
    alpha = scipy.linalg.cho_solve((chol, True), data.residuals, check_finite=False)
    return GPPosteriorCache(chol, alpha, jitter)


def gp_predict(
    cache: GPPosteriorCache | None, data: GPDataset, spec: KernelSpec, noise_var: float, t_star: float
) -> PredictiveDistribution:
    """Predictive of a noisy observation at ``t_star``.

    The latent variance ``k** - k*^T (K + noise I)^{-1} k*`` is reported with
    ``noise_var`` added so that intervals apply to observed data.
    """
    prior_var = float(kernel_eval(spec, 0.0))
    if cache is None or len(data) == 0:
        return PredictiveDistribution(data.mean_constant, prior_var + noise_var)
    k_star = kernel_eval(spec, data.times - t_star)
    mean = data.mean_constant + float(k_star @ cache.alpha)
    v = scipy.linalg.solve_triangular(cache.cholesky_factor, k_star, lower=True, check_finite=False)
    latent_var = max(prior_var - float(v @ v), 0.0)
    return PredictiveDistribution(mean, latent_var + noise_var)


def gp_log_marginal_likelihood(spec: KernelSpec, noise_var: float, data: GPDataset) -> float:
    """``log N(y; C, K + noise I)`` by dense Cholesky."""
    if len(data) == 0:
        return 0.0
    cache = gp_fit(spec, noise_var, data)
    n = len(data)
    return float(
        -0.5 * data.residuals @ cache.alpha
        - np.sum(np.log(np.diag(cache.cholesky_factor)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def gp_sample(spec: KernelSpec, noise_var: float, times, seed=None, mean: float = 0.0) -> np.ndarray:
    """One joint draw of noisy observations at ``times`` from the GP prior.

    ``seed`` may be an int or a ``numpy.random.Generator``; a given seed
    reproduces the draw exactly.
    """
    times = np.asarray(times, dtype=float)
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    rng = np.random.default_rng(seed)
    K = gram(spec, times)
    K[np.diag_indices_from(K)] += noise_var
    chol, _ = robust_cholesky(K)
    return mean + chol @ rng.standard_normal(times.size)
