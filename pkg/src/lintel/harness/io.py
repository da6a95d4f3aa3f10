"""Reading and writing time series and step-record streams."""

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from datetime import datetime
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from lintel.errors import IngestionError
from lintel.streaming import StepRecord

RECORDS_SCHEMA = "lintel.step_records"
RECORDS_VERSION = 1


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A validated univariate series with optional ground-truth columns."""

    times: np.ndarray
    values: np.ndarray
    is_outlier: np.ndarray | None = None
    in_regime: np.ndarray | None = None
    latent: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise IngestionError("times and values must be 1-d and of equal length")
        for i in np.flatnonzero(np.diff(times) <= 0)[:1]:
            raise IngestionError(f"timestamp {times[i + 1]!r} does not increase", row=int(i + 1))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        for name in ("is_outlier", "in_regime"):
            col = getattr(self, name)
            if col is not None:
                object.__setattr__(self, name, np.asarray(col, dtype=bool))
        if self.latent is not None:
            object.__setattr__(self, "latent", np.asarray(self.latent, dtype=float))

    def __len__(self):
        return self.times.size

    def split(self, n: int) -> tuple["TimeSeries", "TimeSeries"]:
        """First ``n`` points and the rest."""
        def part(sl):
            opt = {k: (None if getattr(self, k) is None else getattr(self, k)[sl]) for k in ("is_outlier", "in_regime", "latent")}
            return TimeSeries(self.times[sl], self.values[sl], name=self.name, **opt)
        return part(slice(None, n)), part(slice(n, None))


@dataclass(frozen=True)
class CsvSchema:
    timestamp_column: str = "timestamp"
    value_column: str = "value"
    truth_column: str | None = None
    regime_column: str | None = None
    time_unit: float = 1.0


def _parse_time(raw: str, row: int):
    try:
        return float(raw)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(raw.strip().replace("Z", "+00:00"))
    except ValueError:
        raise IngestionError(f"cannot parse timestamp {raw!r}", row=row) from None


def _parse_float(raw, column: str, row: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise IngestionError(f"cannot parse {column} value {raw!r}", row=row) from None
    if not math.isfinite(value):
        raise IngestionError(f"missing or non-finite {column} value {raw!r}", row=row)
    return value


def _parse_flag(raw, column: str, row: int) -> bool:
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "1.0"):
        return True
    if text in ("0", "false", "no", "0.0", ""):
        return False
    raise IngestionError(f"cannot parse {column} flag {raw!r}", row=row)


def ingest_csv(path, schema: CsvSchema = CsvSchema()) -> TimeSeries:
    """Load a ``timestamp,value`` CSV such as a Numenta Anomaly Benchmark file.

    Numeric timestamps are used as they are; ISO-8601 datetimes become
    seconds since the first row. Either is then divided by
    ``schema.time_unit``. Row numbers in errors count data rows from 0.
    """
    path = Path(path)
    if schema.time_unit <= 0:
        raise IngestionError(f"time_unit must be positive, got {schema.time_unit}")
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        wanted = [schema.timestamp_column, schema.value_column, schema.truth_column, schema.regime_column]
        missing = [c for c in wanted if c is not None and c not in header]
        if missing:
            raise IngestionError(f"{path}: missing column(s) {missing}; header is {header}")
        stamps, values, truth, regime = [], [], [], []
        for row, rec in enumerate(reader):
            raw_t = rec[schema.timestamp_column]
            if raw_t is None or not raw_t.strip():
                raise IngestionError("missing timestamp", row=row)
            stamps.append(_parse_time(raw_t, row))
            values.append(_parse_float(rec[schema.value_column], schema.value_column, row))
            if schema.truth_column:
                truth.append(_parse_flag(rec[schema.truth_column], schema.truth_column, row))
            if schema.regime_column:
                regime.append(_parse_flag(rec[schema.regime_column], schema.regime_column, row))

    if not stamps:
        raise IngestionError(f"{path}: no data rows")
    kinds = {isinstance(s, datetime) for s in stamps}
    if len(kinds) > 1:
        row = next(i for i, s in enumerate(stamps) if isinstance(s, datetime) != isinstance(stamps[0], datetime))
        raise IngestionError("mixes numeric and datetime timestamps", row=row)
    if isinstance(stamps[0], datetime):
        try:
            seconds = [(s - stamps[0]).total_seconds() for s in stamps]
        except TypeError:
            raise IngestionError("mixes timezone-aware and naive datetimes") from None
    else:
        seconds = stamps
    times = np.asarray(seconds, dtype=float) / schema.time_unit
    for i in np.flatnonzero(np.diff(times) <= 0)[:1]:
        raise IngestionError("timestamp is not strictly after the previous row", row=int(i + 1))
    return TimeSeries(
        times,
        np.asarray(values),
        is_outlier=np.asarray(truth) if schema.truth_column else None,
        in_regime=np.asarray(regime) if schema.regime_column else None,
        name=path.stem,
    )


def write_series_csv(series: TimeSeries, path) -> None:
    columns = {"timestamp": series.times, "value": series.values}
    if series.is_outlier is not None:
        columns["is_outlier"] = series.is_outlier.astype(int)
    if series.in_regime is not None:
        columns["in_regime"] = series.in_regime.astype(int)
    if series.latent is not None:
        columns["latent"] = series.latent
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in zip(*columns.values()):
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in (x.item() for x in row)])


def record_to_dict(rec: StepRecord) -> dict:
    out = asdict(rec)
    for key in ("model_means", "model_vars", "weights_used"):
        out[key] = list(out[key])
    return out


def record_from_dict(data: dict) -> StepRecord:
    names = {f.name for f in fields(StepRecord)}
    kwargs = {k: v for k, v in data.items() if k in names}
    for key in ("model_means", "model_vars", "weights_used"):
        kwargs[key] = tuple(kwargs[key])
    return StepRecord(**kwargs)


def write_records(fh: IO[str], records: Iterable[StepRecord], header: dict | None = None, summary: dict | None = None) -> None:
    """Newline-delimited JSON: a header line, one line per step, then a summary."""
    head = {"type": "header", "schema": RECORDS_SCHEMA, "version": RECORDS_VERSION}
    head.update(header or {})
    fh.write(json.dumps(head) + "\n")
    for rec in records:
        fh.write(json.dumps({"type": "step", **record_to_dict(rec)}) + "\n")
    if summary is not None:
        fh.write(json.dumps({"type": "summary", **summary}) + "\n")


def read_records(fh: IO[str]) -> tuple[dict, list[StepRecord], dict | None]:
    header, records, summary = None, [], None
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        kind = obj.pop("type", None)
        if kind == "header":
            if obj.get("schema") != RECORDS_SCHEMA:
                raise IngestionError(f"unknown record schema {obj.get('schema')!r}", row=lineno)
            if obj.get("version", 0) > RECORDS_VERSION:
                raise IngestionError(f"record schema version {obj['version']} is newer than {RECORDS_VERSION}", row=lineno)
            header = obj
        elif kind == "step":
            records.append(record_from_dict(obj))
        elif kind == "summary":
            summary = obj
        else:
            raise IngestionError(f"unknown line type {kind!r}", row=lineno)
    if header is None:
        raise IngestionError("record stream has no header line")
    return header, records, summary
