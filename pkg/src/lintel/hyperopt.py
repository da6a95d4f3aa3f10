"""Evidence maximization on a pretraining prefix and candidate-bank construction."""

import enum
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from lintel.errors import FitFailureError
from lintel.kernel_gp import GPDataset
from lintel.kernels import KernelSpec, to_state_space
from lintel.markov_gp import stream_loglik
from lintel.streaming import Candidate

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 500
DEFAULT_RESTARTS = 5


@dataclass(frozen=True)
class HyperParams:
    """A kernel (its leaf hyperparameters), noise variance and mean constant."""

    spec: KernelSpec
    noise_var: float
    mean_constant: float = 0.0

    @property
    def theta(self) -> np.ndarray:
        """Optimization vector: leaf log-hyperparameters then log noise variance."""
        return np.append(self.spec.log_params(), math.log(self.noise_var))

    def with_theta(self, theta) -> "HyperParams":
        theta = np.asarray(theta, dtype=float)
        return HyperParams(self.spec.with_log_params(theta[:-1]), float(np.exp(theta[-1])), self.mean_constant)

    def candidate(self) -> Candidate:
        return Candidate(self.spec, self.noise_var)

    def to_dict(self) -> dict:
        return {"kernel": self.spec.to_dict(), "noise_var": self.noise_var, "mean_constant": self.mean_constant}

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        return cls(KernelSpec.from_dict(data["kernel"]), float(data["noise_var"]), float(data.get("mean_constant", 0.0)))


def log_evidence(params: HyperParams, data: GPDataset) -> float:
    return stream_loglik(to_state_space(params.spec), params.noise_var, params.mean_constant, data)


def _bounds(template: KernelSpec, data: GPDataset) -> list[tuple[float, float]]:
    # Lengthscales below the typical sampling interval make a Matern kernel
    # indistinguishable from white noise, leaving a flat ridge in the evidence.
    spacing = float(np.median(np.diff(data.times)))
    span = float(data.times[-1] - data.times[0])
    var = float(np.var(data.values)) or 1.0
    var_bounds = (math.log(var * 1e-6), math.log(var * 1e3))
    ell_bounds = (math.log(spacing), math.log(100.0 * max(span, spacing)))
    bounds = []
    for _ in template.leaves():
        bounds += [var_bounds, ell_bounds]
    return bounds + [var_bounds]


def fit_evidence(
    template: KernelSpec,
    pretrain: GPDataset,
    init: HyperParams | None = None,
    budget: int = DEFAULT_BUDGET,
    restarts: int = DEFAULT_RESTARTS,
    seed=0,
) -> HyperParams:
    """Maximize the log evidence over log-hyperparameters with Nelder-Mead.

    The first start is ``init`` (by default the template's hyperparameters
    with noise variance at 10% of the data variance); ``restarts`` further
    starts perturb it by a standard normal in log space. Each start may use
    up to ``budget`` objective evaluations. The mean constant is fixed to the
    pretraining average. The best point found is returned, and it is never
    worse than ``init``.
    """
    if len(pretrain) < 10:
        raise ValueError(f"need at least 10 pretraining points, got {len(pretrain)}")
    mean = float(np.mean(pretrain.values))
    if init is None:
        init = HyperParams(template, 0.1 * (float(np.var(pretrain.values)) or 1.0), mean)
    else:
        init = HyperParams(init.spec, init.noise_var, mean)
    if budget <= 0:
        return init

    bounds = _bounds(init.spec, pretrain)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def objective(theta):
        try:
            value = -log_evidence(init.with_theta(theta), pretrain)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            return np.inf
        return value if math.isfinite(value) else np.inf

    theta0 = init.theta
    best_theta, best_value = theta0, objective(theta0)
    rng = np.random.default_rng(seed)
    starts = [np.clip(theta0, lo, hi)]
    starts += [np.clip(theta0 + rng.standard_normal(theta0.size), lo, hi) for _ in range(restarts)]
    for x0 in starts:
        if not math.isfinite(objective(x0)):
            continue
        res = scipy.optimize.minimize(
            objective, x0, method="Nelder-Mead", bounds=bounds,
            options={"maxfev": budget, "xatol": 1e-4, "fatol": 1e-6},
        )
        log.debug("Nelder-Mead start %s -> %.6g after %d evaluations", x0, res.fun, res.nfev)
        if res.fun < best_value:
            best_theta, best_value = res.x, float(res.fun)
    if not math.isfinite(best_value):
        raise FitFailureError("log evidence was non-finite at every starting point")
    return init.with_theta(best_theta)


class CandidateScheme(str, enum.Enum):
    CPU_GRID = "cpu_grid"
    TWO_MODEL = "two_model"


@dataclass(frozen=True)
class CandidateBank:
    candidates: tuple[Candidate, ...]
    mean_constant: float

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("a candidate bank needs at least one candidate")
        object.__setattr__(self, "candidates", tuple(self.candidates))

    def __len__(self):
        return len(self.candidates)

    def to_dict(self) -> dict:
        return {"mean_constant": self.mean_constant, "candidates": [c.to_dict() for c in self.candidates]}

    @classmethod
    def from_dict(cls, data: dict) -> "CandidateBank":
        return cls(tuple(Candidate.from_dict(c) for c in data["candidates"]), float(data["mean_constant"]))


def make_candidates(
    fit: HyperParams,
    scheme: CandidateScheme = CandidateScheme.CPU_GRID,
    alternative: HyperParams | None = None,
    include_fitted: bool = False,
    factors: tuple[float, ...] = (1.0, 2.0, 0.5),
) -> CandidateBank:
    """Build a candidate bank around a fitted model.

    ``CPU_GRID`` scales the process variance (every leaf) and the noise
    variance independently by each of ``factors``, skipping the unscaled
    pair unless ``include_fitted``. ``TWO_MODEL`` pairs the fit with
    ``alternative``.
    """
    scheme = CandidateScheme(scheme)
    if scheme is CandidateScheme.TWO_MODEL:
        if alternative is None:
            raise ValueError("the two-model scheme needs an alternative model")
        cands = (fit.candidate(), alternative.candidate())
    else:
        cands = tuple(
            Candidate(fit.spec.scaled(fs), fit.noise_var * fn)
            for fs, fn in itertools.product(factors, repeat=2)
            if include_fitted or (fs, fn) != (1.0, 1.0)
        )
    return CandidateBank(cands, fit.mean_constant)
