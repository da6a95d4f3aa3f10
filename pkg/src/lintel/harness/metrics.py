"""Scoring of step-record streams."""

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from lintel.streaming import StepRecord


@dataclass(frozen=True)
class MetricsReport:
    """Predictive quality and bookkeeping for one run (or a batch of runs).

    ``mpll`` is the mean log predictive density of the scored observations
    and ``nmse`` the mean squared error over their sample variance.
    ``outliers_detected`` and ``false_positive_rate`` need truth labels.
    """

    mpll: float
    nmse: float
    runtime_seconds: float = math.nan
    n_outliers_flagged: int = 0
    n_changepoints: int = 0
    n_scored: int = 0
    outliers_detected: int | None = None
    n_true_outliers: int | None = None
    false_positive_rate: float | None = None
    per_seed: tuple["MetricsReport", ...] = ()

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_seed"] = [r.to_dict() for r in self.per_seed]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        data = dict(data)
        data["per_seed"] = tuple(cls.from_dict(r) for r in data.get("per_seed", ()))
        return cls(**data)


def score(
    records: Sequence[StepRecord],
    truth=None,
    exclude_outliers: bool = True,
    runtime_seconds: float = math.nan,
) -> MetricsReport:
    if not records:
        raise ValueError("cannot score an empty record stream")
    y = np.array([r.y for r in records])
    m = np.array([r.fused_mean for r in records])
    v = np.array([r.fused_var for r in records])
    flagged = np.array([r.is_outlier for r in records])

    keep = np.ones(y.size, dtype=bool)
    detected = n_true = fpr = None
    if truth is not None:
        truth = np.asarray(truth, dtype=bool)
        if truth.shape != y.shape:
            raise ValueError(f"{truth.size} truth labels for {y.size} records")
        if exclude_outliers:
            keep = ~truth
        n_true = int(truth.sum())
        detected = int((flagged & truth).sum())
        clean = ~truth
        fpr = float((flagged & clean).sum() / clean.sum()) if clean.any() else math.nan

    y, m, v = y[keep], m[keep], v[keep]
    mpll = float(np.mean(-0.5 * (np.log(2.0 * math.pi * v) + (y - m) ** 2 / v)))
    s2 = float(np.var(y))
    if s2 > 0:
        nmse = float(np.mean((m - y) ** 2) / s2)
    else:
        warnings.warn("scored observations have zero variance; nMSE is undefined", RuntimeWarning, stacklevel=2)
        nmse = math.nan
    return MetricsReport(
        mpll=mpll,
        nmse=nmse,
        runtime_seconds=float(runtime_seconds),
        n_outliers_flagged=int(flagged.sum()),
        n_changepoints=sum(r.changepoint for r in records),
        n_scored=int(keep.sum()),
        outliers_detected=detected,
        n_true_outliers=n_true,
        false_positive_rate=fpr,
    )


def aggregate(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Average a batch of per-seed reports, keeping them as the breakdown."""
    def mean(name):
        vals = [getattr(r, name) for r in reports]
        return None if any(v is None for v in vals) else float(np.mean(vals))

    return MetricsReport(
        mpll=mean("mpll"),
        nmse=mean("nmse"),
        runtime_seconds=mean("runtime_seconds"),
        n_outliers_flagged=sum(r.n_outliers_flagged for r in reports),
        n_changepoints=sum(r.n_changepoints for r in reports),
        n_scored=sum(r.n_scored for r in reports),
        false_positive_rate=mean("false_positive_rate"),
        per_seed=tuple(reports),
    )
