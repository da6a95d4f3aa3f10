"""Exact GP inference by Kalman filtering the state-space representation.

Each step costs O(d^3) in the state dimension and nothing in the number of
observations already absorbed.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from lintel import _numeric
from lintel.errors import OutOfOrderError
from lintel.kernels import StateSpaceModel


class PredictiveDistribution(NamedTuple):
    """Gaussian law of the next observation (observation units)."""

    mean: float
    variance: float


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Filtering mean and covariance of the SDE state.

    ``t_last`` is the time the state refers to; ``None`` means the
    stationary prior, which is the same at every time.
    """

    m: np.ndarray
    P: np.ndarray
    t_last: float | None = None


def init_state(ssm: StateSpaceModel) -> GaussianState:
    return GaussianState(m=np.zeros(ssm.state_dim), P=np.array(ssm.Pinf), t_last=None)


def predict_state(state: GaussianState, ssm: StateSpaceModel, t: float) -> GaussianState:
    """Propagate ``state`` forward to time ``t``."""
    if state.t_last is None:
        return GaussianState(state.m, state.P, float(t))
    if t < state.t_last:
        raise OutOfOrderError(t, state.t_last)
    m, P = _numeric.propagate(state.m, state.P, ssm.F, ssm.Pinf, float(t - state.t_last))
    return GaussianState(m, P, float(t))


def predictive(state: GaussianState, ssm: StateSpaceModel, noise_var: float, mean: float) -> PredictiveDistribution:
    """Observation-space predictive of a propagated state, with prior mean ``mean``."""
    h = ssm.h
    return PredictiveDistribution(float(h @ state.m + mean), float(h @ state.P @ h + noise_var))


def update_state(state: GaussianState, ssm: StateSpaceModel, noise_var: float, mean: float, y: float) -> GaussianState:
    """Condition a propagated state on observation ``y``."""
    m, P, _, _ = _numeric.kalman_update(state.m, state.P, ssm.h, float(noise_var), float(mean), float(y))
    return GaussianState(m, P, state.t_last)


class FilterResult(NamedTuple):
    means: np.ndarray
    variances: np.ndarray
    state: GaussianState
    covariances: np.ndarray | None


def filter_series(
    ssm: StateSpaceModel,
    noise_var: float,
    mean: float,
    times,
    values,
    state: GaussianState | None = None,
    store_covariances: bool = False,
) -> FilterResult:
    """Filter a whole series, returning one-step-ahead predictives.

    Equivalent to alternating :func:`predict_state`, :func:`predictive` and
    :func:`update_state`, but runs in a single compiled loop.
    """
    times = np.ascontiguousarray(times, dtype=float)
    values = np.ascontiguousarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1:
        raise ValueError("times and values must be 1-d arrays of equal length")
    if state is None:
        state = init_state(ssm)
    has_last = state.t_last is not None
    t_last = state.t_last if has_last else (times[0] if len(times) else 0.0)
    steps = np.diff(times, prepend=t_last)
    bad = np.flatnonzero(steps < 0)
    if bad.size:
        i = bad[0]
        raise OutOfOrderError(times[i], times[i - 1] if i else t_last)
    means, variances, m, P, covs = _numeric.filter_stream(
        ssm.F, ssm.Pinf, ssm.h, float(noise_var), float(mean), times, values,
        np.array(state.m, dtype=float), np.array(state.P, dtype=float),
        float(t_last), has_last, store_covariances,
    )
    final_t = float(times[-1]) if len(times) else state.t_last
    return FilterResult(means, variances, GaussianState(m, P, final_t), covs if store_covariances else None)


def stream_loglik(ssm: StateSpaceModel, noise_var: float, mean: float, data) -> float:
    """Log marginal likelihood via the prediction-error decomposition.

    ``data`` is anything with ``times`` and ``values`` sequences, typically a
    :class:`lintel.kernel_gp.GPDataset`. Its own mean constant is ignored in
    favour of ``mean``.
    """
    values = np.ascontiguousarray(data.values, dtype=float)
    if values.size == 0:
        return 0.0
    res = filter_series(ssm, noise_var, mean, data.times, values)
    return float(_numeric.gaussian_loglik_sum(values, res.means, res.variances))
