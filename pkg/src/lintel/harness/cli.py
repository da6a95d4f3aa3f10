"""Command-line entry point: ``lintel {synth,fit,run,compare}``."""

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from lintel.errors import ConfigError, IngestionError, InvalidSpecError, NumericalError
from lintel.harness import experiment, synth
from lintel.harness.io import write_records, write_series_csv

SEED_ENV = "LINTEL_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

# flag name -> dotted config key
_OVERRIDES = {
    "algorithm": "algorithm",
    "fusion": "fusion",
    "seed": "seed",
    "pretrain": "pretrain",
    "data_path": "data.path",
    "n_pcb_max": "stream.n_pcb_max",
    "alpha": "stream.alpha",
    "mean_update_period": "stream.mean_update_period",
    "window": "stream.window",
    "budget": "candidates.budget",
    "restarts": "candidates.restarts",
}


def _set_path(data: dict, dotted: str, value):
    *parents, leaf = dotted.split(".")
    node = data
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: '{key}' is not a section")
    node[leaf] = value


def _load(args) -> experiment.ExperimentConfig:
    try:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {args.config} must be a mapping")
    for flag, key in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            _set_path(data, key, value)
    for item in args.set or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        _set_path(data, key.strip(), yaml.safe_load(raw))
    if os.environ.get(SEED_ENV):
        try:
            data["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}") from None
    return experiment.parse_config(data)


def _output(path):
    return contextlib.nullcontext(sys.stdout) if path in (None, "-") else open(path, "w")


def cmd_synth(args) -> int:
    seed = int(os.environ.get(SEED_ENV) or args.seed)
    make = synth.synth_outliers if args.experiment == "outliers" else synth.synth_regimes
    series = make(seed)
    write_series_csv(series, args.output)
    print(f"wrote {len(series)} points to {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load(args)
    series = experiment.load_series(cfg)
    bank = experiment.fit_bank(cfg, experiment.pretrain_dataset(cfg, series))
    with _output(args.output) as fh:
        yaml.safe_dump(bank.to_dict(), fh, sort_keys=False)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    result = experiment.run_experiment(cfg)
    with _output(args.output) as fh:
        write_records(fh, result.records, header=result.header, summary=result.report.to_dict())
    print(json.dumps(result.report.to_dict()), file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    report = experiment.compare(cfg)
    with _output(args.output) as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lintel", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic benchmark series as CSV")
    p.add_argument("--experiment", choices=("outliers", "regimes"), default="outliers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    for name, func, help_text in (
        ("fit", cmd_fit, "fit hyperparameters and write the candidate bank (YAML)"),
        ("run", cmd_run, "stream one algorithm and write step records (JSON lines)"),
        ("compare", cmd_compare, "run INTEL and LINTEL on the same data and bank"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
        p.add_argument("--algorithm", choices=("lintel", "intel"))
        p.add_argument("--fusion", choices=("arithmetic", "geometric"))
        p.add_argument("--seed", type=int)
        p.add_argument("--pretrain", type=int)
        p.add_argument("--data-path")
        p.add_argument("--n-pcb-max", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--mean-update-period", type=int)
        p.add_argument("--window", type=int)
        p.add_argument("--budget", type=int)
        p.add_argument("--restarts", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key, e.g. stream.alpha=0.8")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidSpecError, IngestionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
