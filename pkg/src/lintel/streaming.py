"""Online prediction loops with outlier gating and regime resets.

Both algorithms share one control flow per observation ``(t, y)``:

1. every candidate model reports a Gaussian predictive for ``y``;
2. the previous weights are flattened by the forgetting factor and used
   to fuse the candidates;
3. ``y`` outside the fused 3-sigma interval is an outlier and goes to the
   potential changepoint bucket (PCB); otherwise it is absorbed, the PCB is
   emptied and the weights are updated with each candidate's likelihood;
4. a full PCB declares a changepoint: the mean constant becomes the PCB
   average and every candidate is rebuilt from the PCB points alone.

``step_lintel`` keeps an exact Kalman filtering state per candidate, so a
step costs the same at any stream position. ``step_intel`` refits a kernel
GP on a window of the last ``window`` accepted points at every step.
"""

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from lintel import _numeric
from lintel.errors import OutOfOrderError
from lintel.fusion import FusionRule, bayes_update, forget, fuse_arrays, gaussian_logpdf, regularize, uniform_weights
from lintel.kernel_gp import GPDataset, gp_fit, gp_predict
from lintel.kernels import KernelSpec, kernel_eval, to_state_space
from lintel.markov_gp import GaussianState, PredictiveDistribution, filter_series, init_state

OUTLIER_SIGMAS = 3.0


@dataclass(frozen=True)
class Candidate:
    """One candidate model: a kernel and its observation-noise variance."""

    spec: KernelSpec
    noise_var: float

    def __post_init__(self):
        if not self.noise_var > 0:
            raise ValueError(f"noise variance must be positive, got {self.noise_var}")
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @cached_property
    def ssm(self):
        return to_state_space(self.spec)

    @cached_property
    def prior_variance(self) -> float:
        return float(kernel_eval(self.spec, 0.0))

    def to_dict(self) -> dict:
        return {"kernel": self.spec.to_dict(), "noise_var": self.noise_var}

    @classmethod
    def from_dict(cls, data: dict) -> "Candidate":
        return cls(KernelSpec.from_dict(data["kernel"]), data["noise_var"])


@dataclass(frozen=True)
class StreamConfig:
    n_pcb_max: int = 3
    alpha: float = 0.9
    mean_update_period: float = math.inf
    window: int = 20
    fusion_rule: FusionRule = FusionRule.ARITHMETIC
    initial_weights: tuple[float, ...] | None = None
    initial_mean: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "fusion_rule", FusionRule(self.fusion_rule))
        if self.mean_update_period is None:
            object.__setattr__(self, "mean_update_period", math.inf)
        if int(self.n_pcb_max) != self.n_pcb_max or self.n_pcb_max < 1:
            raise ValueError(f"n_pcb_max must be a positive integer, got {self.n_pcb_max}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.mean_update_period >= 1:
            raise ValueError(f"mean_update_period must be >= 1, got {self.mean_update_period}")
        if int(self.window) != self.window or self.window < 2:
            raise ValueError(f"window must be an integer >= 2, got {self.window}")
        if self.initial_weights is not None:
            object.__setattr__(self, "initial_weights", tuple(float(w) for w in self.initial_weights))

    def weights_for(self, k: int) -> np.ndarray:
        if self.initial_weights is None:
            return uniform_weights(k)
        if len(self.initial_weights) != k:
            raise ValueError(f"{len(self.initial_weights)} initial weights for {k} candidates")
        w = np.asarray(self.initial_weights, dtype=float)
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("initial weights must be nonnegative and not all zero")
        return regularize(w / w.sum())


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Everything the stream carries from one step to the next.

    ``filters`` holds one Kalman state per candidate (LINTEL); ``window``
    holds the accepted points the kernel GPs condition on (INTEL).
    ``t_last`` is the time of the last absorbed point and ``t_prev`` the
    time of the last point seen, outlier or not.
    """

    weights: np.ndarray
    mean_constant: float
    filters: tuple[GaussianState, ...] = ()
    window: tuple[tuple[float, float], ...] = ()
    pcb: tuple[tuple[float, float], ...] = ()
    steps_since_mean_update: int = 0
    accepted_sum: float = 0.0
    t_last: float | None = None
    t_prev: float | None = None


@dataclass(frozen=True)
class StepRecord:
    t: float
    y: float
    fused_mean: float
    fused_var: float
    model_means: tuple[float, ...]
    model_vars: tuple[float, ...]
    weights_used: tuple[float, ...]
    is_outlier: bool
    changepoint: bool = False
    mean_constant: float = field(default=0.0)


def init_lintel(candidates: Sequence[Candidate], cfg: StreamConfig) -> EnsembleState:
    return EnsembleState(
        weights=cfg.weights_for(len(candidates)),
        mean_constant=float(cfg.initial_mean),
        filters=tuple(init_state(c.ssm) for c in candidates),
    )


def init_intel(candidates: Sequence[Candidate], cfg: StreamConfig) -> EnsembleState:
    return EnsembleState(weights=cfg.weights_for(len(candidates)), mean_constant=float(cfg.initial_mean))


def _check_order(state: EnsembleState, t: float):
    if state.t_prev is not None and t < state.t_prev:
        raise OutOfOrderError(t, state.t_prev)


def _lintel_propagate(state: EnsembleState, candidates: Sequence[Candidate], t: float):
    """Prior moments of every candidate's state at ``t`` and their predictives."""
    k = len(candidates)
    means = np.empty(k)
    variances = np.empty(k)
    moments = []
    for i, (cand, filt) in enumerate(zip(candidates, state.filters)):
        ssm = cand.ssm
        # a negative step tells the compiled routine to skip propagation
        dt = -1.0 if filt.t_last is None else t - filt.t_last
        m, P, means[i], variances[i] = _numeric.propagate_predictive(
            filt.m, filt.P, ssm.F, ssm.Pinf, ssm.h, dt, cand.noise_var, state.mean_constant
        )
        moments.append((m, P))
    return moments, means, variances


def _intel_predictives(state: EnsembleState, candidates: Sequence[Candidate], t: float):
    k = len(candidates)
    means = np.empty(k)
    variances = np.empty(k)
    if state.window:
        times, values = zip(*state.window)
        data = GPDataset(times, values, state.mean_constant)
    else:
        data = GPDataset((), (), state.mean_constant)
    for i, cand in enumerate(candidates):
        cache = gp_fit(cand.spec, cand.noise_var, data) if len(data) else None
        means[i], variances[i] = gp_predict(cache, data, cand.spec, cand.noise_var, t)
    return means, variances


def _gate(state: EnsembleState, cfg: StreamConfig, means, variances, y: float):
    w_tilde = forget(state.weights, cfg.alpha)
    fused = fuse_arrays(means, variances, w_tilde, cfg.fusion_rule)
    half_width = OUTLIER_SIGMAS * math.sqrt(fused.variance)
    is_outlier = not (fused.mean - half_width <= y <= fused.mean + half_width)
    return w_tilde, fused, is_outlier


def _record(t, y, fused, means, variances, w_tilde, is_outlier, changepoint, mean_constant) -> StepRecord:
    return StepRecord(
        t=float(t),
        y=float(y),
        fused_mean=fused.mean,
        fused_var=fused.variance,
        model_means=tuple(means.tolist()),
        model_vars=tuple(variances.tolist()),
        weights_used=tuple(w_tilde.tolist()),
        is_outlier=is_outlier,
        changepoint=changepoint,
        mean_constant=mean_constant,
    )


def predict_next(state: EnsembleState, candidates: Sequence[Candidate], cfg: StreamConfig, t: float, algorithm: str = "lintel"):
    """Fused predictive at ``t`` without absorbing anything.

    Returns ``(fused, model_means, model_vars, w_tilde)``.
    """
    if algorithm == "lintel":
        _, means, variances = _lintel_propagate(state, candidates, t)
    else:
        means, variances = _intel_predictives(state, candidates, t)
    w_tilde = forget(state.weights, cfg.alpha)
    return fuse_arrays(means, variances, w_tilde, cfg.fusion_rule), means, variances, w_tilde


def shift_filter_mean(m: np.ndarray, h: np.ndarray, delta: float) -> np.ndarray:
    """Move ``h^T m`` down by ``delta``, proportionally to the observed components.

    Falls back to a uniform split over the observed components when
    ``h^T m`` is too close to zero for the proportional rule.
    """
    projected = float(h @ m)
    if abs(projected) > 1e-9 * (1.0 + abs(delta)):
        return m - (h * m) * delta / projected
    return m - h * delta / np.sum(np.abs(h))


def apply_mean_update(state: EnsembleState, candidates: Sequence[Candidate], delta: float) -> EnsembleState:
    """Raise the mean constant by ``delta`` and compensate every filter state.

    The one-step predictive at the current filter time is unchanged.
    """
    if delta == 0.0:
        return state
    filters = tuple(
        GaussianState(shift_filter_mean(f.m, c.ssm.h, delta), f.P, f.t_last)
        for c, f in zip(candidates, state.filters)
    )
    return replace(state, filters=filters, mean_constant=state.mean_constant + delta)


def _refilter(candidates: Sequence[Candidate], mean: float, pcb) -> tuple[GaussianState, ...]:
    times = np.array([p[0] for p in pcb])
    values = np.array([p[1] for p in pcb])
    return tuple(filter_series(c.ssm, c.noise_var, mean, times, values).state for c in candidates)


def step_lintel(
    state: EnsembleState, candidates: Sequence[Candidate], cfg: StreamConfig, t: float, y: float
) -> tuple[EnsembleState, StepRecord]:
    """Predict ``y`` at ``t`` with exact Kalman filtering, then absorb or buffer it."""
    t = float(t)
    y = float(y)
    _check_order(state, t)
    moments, means, variances = _lintel_propagate(state, candidates, t)
    w_tilde, fused, is_outlier = _gate(state, cfg, means, variances, y)
    changepoint = False

    if not is_outlier:
        C = state.mean_constant
        filters = []
        for cand, (m, P) in zip(candidates, moments):
            m, P, _, _ = _numeric.kalman_update(m, P, cand.ssm.h, cand.noise_var, C, y)
            filters.append(GaussianState(m, P, t))
        new = replace(
            state,
            weights=bayes_update(w_tilde, gaussian_logpdf(y, means, variances)),
            filters=tuple(filters),
            pcb=(),
            steps_since_mean_update=state.steps_since_mean_update + 1,
            accepted_sum=state.accepted_sum + y,
            t_last=t,
            t_prev=t,
        )
        if new.steps_since_mean_update >= cfg.mean_update_period:
            target = new.accepted_sum / new.steps_since_mean_update
            new = apply_mean_update(new, candidates, target - C)
            new = replace(new, mean_constant=target, steps_since_mean_update=0, accepted_sum=0.0)
    else:
        pcb = state.pcb + ((t, y),)
        if len(pcb) >= cfg.n_pcb_max:
            changepoint = True
            C = float(np.mean([p[1] for p in pcb]))
            new = replace(
                state,
                mean_constant=C,
                filters=_refilter(candidates, C, pcb),
                pcb=(),
                steps_since_mean_update=0,
                accepted_sum=0.0,
                t_last=t,
                t_prev=t,
            )
        else:
            new = replace(state, pcb=pcb, t_prev=t)

    return new, _record(t, y, fused, means, variances, w_tilde, is_outlier, changepoint, new.mean_constant)


def step_intel(
    state: EnsembleState, candidates: Sequence[Candidate], cfg: StreamConfig, t: float, y: float
) -> tuple[EnsembleState, StepRecord]:
    """Predict ``y`` at ``t`` from kernel GPs refit on the recent window, then absorb or buffer it."""
    t = float(t)
    y = float(y)
    _check_order(state, t)
    means, variances = _intel_predictives(state, candidates, t)
    w_tilde, fused, is_outlier = _gate(state, cfg, means, variances, y)
    changepoint = False

    if not is_outlier:
        window = (state.window + ((t, y),))[-cfg.window :]
        new = replace(
            state,
            weights=bayes_update(w_tilde, gaussian_logpdf(y, means, variances)),
            window=window,
            pcb=(),
            steps_since_mean_update=state.steps_since_mean_update + 1,
            t_last=t,
            t_prev=t,
        )
        if new.steps_since_mean_update >= cfg.mean_update_period:
            new = replace(new, mean_constant=float(np.mean([p[1] for p in window])), steps_since_mean_update=0)
    else:
        pcb = state.pcb + ((t, y),)
        if len(pcb) >= cfg.n_pcb_max:
            changepoint = True
            new = replace(
                state,
                mean_constant=float(np.mean([p[1] for p in pcb])),
                window=pcb[-cfg.window :],
                pcb=(),
                steps_since_mean_update=0,
                t_last=t,
                t_prev=t,
            )
        else:
            new = replace(state, pcb=pcb, t_prev=t)

    return new, _record(t, y, fused, means, variances, w_tilde, is_outlier, changepoint, new.mean_constant)


ALGORITHMS = {"lintel": (init_lintel, step_lintel), "intel": (init_intel, step_intel)}


def run_stream(algorithm: str, candidates: Sequence[Candidate], cfg: StreamConfig, times, values):
    """Feed a whole series through one algorithm; returns ``(records, final_state)``."""
    try:
        init, step = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(ALGORITHMS)}") from None
    state = init(candidates, cfg)
    records = []
    for t, y in zip(np.asarray(times, dtype=float).tolist(), np.asarray(values, dtype=float).tolist()):
        state, rec = step(state, candidates, cfg, t, y)
        records.append(rec)
    return records, state
