"""Experiment configuration and the fit -> stream -> score pipeline."""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from lintel.errors import ConfigError, InvalidSpecError
from lintel.fusion import FusionRule
from lintel.harness import synth
from lintel.harness.io import CsvSchema, TimeSeries, ingest_csv
from lintel.harness.metrics import MetricsReport, score
from lintel.hyperopt import CandidateBank, CandidateScheme, HyperParams, fit_evidence, make_candidates
from lintel.kernel_gp import GPDataset
from lintel.kernels import KernelSpec
from lintel.streaming import StepRecord, StreamConfig, run_stream

log = logging.getLogger(__name__)

DEFAULT_FUSION = {"lintel": FusionRule.ARITHMETIC, "intel": FusionRule.GEOMETRIC}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_kernel(value):
    if value is None:
        return value
    try:
        KernelSpec.from_dict(value)
    except (InvalidSpecError, TypeError, AttributeError) as exc:
        raise ValueError(str(exc)) from exc
    return value


class DataSection(_Section):
    source: Literal["synth_outliers", "synth_regimes", "csv"] = "synth_outliers"
    path: str | None = None
    timestamp_column: str = "timestamp"
    value_column: str = "value"
    truth_column: str | None = None
    regime_column: str | None = None
    time_unit: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _csv_needs_path(self):
        if self.source == "csv" and not self.path:
            raise ValueError("data.path is required when data.source is 'csv'")
        return self


class StreamSection(_Section):
    n_pcb_max: int = Field(3, ge=1)
    alpha: float = Field(0.9, ge=0.0, le=1.0)
    mean_update_period: int | None = Field(None, ge=1, description="null means never")
    window: int = Field(20, ge=2)
    initial_weights: list[float] | None = None


class CandidateSection(_Section):
    scheme: Literal["two_model", "cpu_grid", "bank"] = "two_model"
    template: dict[str, Any] | None = None
    alternative: dict[str, Any] | None = None
    fit_alternative: bool = True
    alternative_noise_var: float | None = Field(None, gt=0)
    include_fitted: bool = False
    budget: int = Field(500, ge=0)
    restarts: int = Field(5, ge=0)
    bank_path: str | None = None

    _kernels = field_validator("template", "alternative")(_check_kernel)

    @model_validator(mode="after")
    def _scheme_inputs(self):
        if self.scheme == "bank":
            if not self.bank_path:
                raise ValueError("candidates.bank_path is required for scheme 'bank'")
        elif self.template is None:
            raise ValueError(f"candidates.template is required for scheme {self.scheme!r}")
        if self.scheme == "two_model" and self.alternative is None:
            raise ValueError("candidates.alternative is required for scheme 'two_model'")
        return self


class ExperimentConfig(_Section):
    algorithm: Literal["lintel", "intel"] = "lintel"
    fusion: Literal["arithmetic", "geometric"] | None = None
    seed: int = 0
    pretrain: int = Field(250, ge=10)
    data: DataSection = DataSection()
    stream: StreamSection = StreamSection()
    candidates: CandidateSection

    def fusion_rule(self, algorithm: str | None = None) -> FusionRule:
        if self.fusion is not None and algorithm in (None, self.algorithm):
            return FusionRule(self.fusion)
        return DEFAULT_FUSION[algorithm or self.algorithm]

    def stream_config(self, mean_constant: float, algorithm: str | None = None) -> StreamConfig:
        s = self.stream
        return StreamConfig(
            n_pcb_max=s.n_pcb_max,
            alpha=s.alpha,
            mean_update_period=math.inf if s.mean_update_period is None else s.mean_update_period,
            window=s.window,
            fusion_rule=self.fusion_rule(algorithm),
            initial_weights=s.initial_weights,
            initial_mean=mean_constant,
        )


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return parse_config(data)


def load_series(cfg: ExperimentConfig) -> TimeSeries:
    d = cfg.data
    if d.source == "synth_outliers":
        return synth.synth_outliers(cfg.seed)
    if d.source == "synth_regimes":
        return synth.synth_regimes(cfg.seed)
    return ingest_csv(
        d.path,
        CsvSchema(d.timestamp_column, d.value_column, d.truth_column, d.regime_column, d.time_unit),
    )


def fit_bank(cfg: ExperimentConfig, pretrain: GPDataset) -> CandidateBank:
    c = cfg.candidates
    if c.scheme == "bank":
        try:
            data = yaml.safe_load(Path(c.bank_path).read_text())
            return CandidateBank.from_dict(data)
        except (OSError, yaml.YAMLError, KeyError, TypeError, InvalidSpecError) as exc:
            raise ConfigError(f"candidates.bank_path: cannot load bank: {exc}") from exc

    def fit(kernel: dict, seed_offset: int) -> HyperParams:
        return fit_evidence(
            KernelSpec.from_dict(kernel), pretrain, budget=c.budget, restarts=c.restarts, seed=cfg.seed + seed_offset
        )

    fitted = fit(c.template, 0)
    log.info("fitted %s noise_var=%.4g", fitted.spec.to_dict(), fitted.noise_var)
    if c.scheme == "cpu_grid":
        return make_candidates(fitted, CandidateScheme.CPU_GRID, include_fitted=c.include_fitted)
    if c.fit_alternative:
        alternative = fit(c.alternative, 1000)
    else:
        noise = c.alternative_noise_var if c.alternative_noise_var is not None else fitted.noise_var
        alternative = HyperParams(KernelSpec.from_dict(c.alternative), noise, fitted.mean_constant)
    return make_candidates(fitted, CandidateScheme.TWO_MODEL, alternative=alternative)


@dataclass
class ExperimentResult:
    report: MetricsReport
    records: list[StepRecord]
    bank: CandidateBank
    header: dict = field(default_factory=dict)


def stream_and_score(
    cfg: ExperimentConfig, series: TimeSeries, bank: CandidateBank, algorithm: str | None = None
) -> ExperimentResult:
    """Run one algorithm over the post-pretraining part of ``series``."""
    algorithm = algorithm or cfg.algorithm
    _, online = series.split(cfg.pretrain)
    if len(online) == 0:
        raise ConfigError(f"pretrain: {cfg.pretrain} leaves no points to stream (series has {len(series)})")
    stream_cfg = cfg.stream_config(bank.mean_constant, algorithm)
    start = time.perf_counter()
    records, _ = run_stream(algorithm, bank.candidates, stream_cfg, online.times, online.values)
    elapsed = time.perf_counter() - start
    report = score(records, truth=online.is_outlier, exclude_outliers=True, runtime_seconds=elapsed)
    header = {
        "algorithm": algorithm,
        "fusion": stream_cfg.fusion_rule.value,
        "seed": cfg.seed,
        "series": series.name,
        "pretrain": cfg.pretrain,
        "n_candidates": len(bank),
        "bank": bank.to_dict(),
    }
    return ExperimentResult(report, records, bank, header)


def pretrain_dataset(cfg: ExperimentConfig, series: TimeSeries) -> GPDataset:
    head, _ = series.split(cfg.pretrain)
    if len(head) < 10:
        raise ConfigError(f"pretrain: need at least 10 pretraining points, series has {len(head)}")
    return GPDataset(head.times, head.values, float(np.mean(head.values)))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    series = load_series(cfg)
    bank = fit_bank(cfg, pretrain_dataset(cfg, series))
    return stream_and_score(cfg, series, bank)


def compare(cfg: ExperimentConfig) -> dict:
    """INTEL and LINTEL on the same data and candidate bank.

    Each algorithm uses its default fusion rule unless ``cfg.fusion`` is set.
    """
    series = load_series(cfg)
    bank = fit_bank(cfg, pretrain_dataset(cfg, series))
    results = {}
    for algorithm in ("intel", "lintel"):
        rule = FusionRule(cfg.fusion) if cfg.fusion else DEFAULT_FUSION[algorithm]
        run_cfg = cfg.model_copy(update={"algorithm": algorithm, "fusion": rule.value})
        results[algorithm] = stream_and_score(run_cfg, series, bank)
    intel, lintel = results["intel"].report, results["lintel"].report
    return {
        "series": series.name,
        "seed": cfg.seed,
        "bank": bank.to_dict(),
        "intel": {"fusion": results["intel"].header["fusion"], **intel.to_dict()},
        "lintel": {"fusion": results["lintel"].header["fusion"], **lintel.to_dict()},
        "speedup": intel.runtime_seconds / lintel.runtime_seconds if lintel.runtime_seconds > 0 else math.nan,
        "same_changepoints": [r.changepoint for r in results["intel"].records]
        == [r.changepoint for r in results["lintel"].records],
    }
