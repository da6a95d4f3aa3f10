"""Benchmark harness: data ingestion, synthetic experiments, scoring and the CLI."""

from lintel.harness.experiment import ExperimentConfig, ExperimentResult, compare, load_config, run_experiment
from lintel.harness.io import CsvSchema, TimeSeries, ingest_csv, read_records, write_records
from lintel.harness.metrics import MetricsReport, aggregate, score
from lintel.harness.synth import synth_outliers, synth_regimes

__all__ = [
    "CsvSchema",
    "ExperimentConfig",
    "ExperimentResult",
    "MetricsReport",
    "TimeSeries",
    "aggregate",
    "compare",
    "ingest_csv",
    "load_config",
    "read_records",
    "run_experiment",
    "score",
    "synth_outliers",
    "synth_regimes",
    "write_records",
]
