"""Command line driver: ``warpspec <experiment> [--config cfg.json] [overrides]``.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DomainError, NumericalError
from .experiments import (
    EXPERIMENT_IDS,
    ConfigError,
    ExperimentConfig,
    run_experiment,
)

EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="warpspec",
        description="eigenvalue experiments on rotationally symmetric manifolds")
    sub = p.add_subparsers(dest="experiment", required=True)
    for exp in EXPERIMENT_IDS:
        sp = sub.add_parser(exp, help=f"run the {exp} experiment")
        sp.add_argument("--config", type=str, default=None,
                        help="JSON config file; CLI flags override its fields")
        sp.add_argument("--n", type=int, default=None, help="dimension (default 2)")
        sp.add_argument("--i-min", type=int, default=None, dest="i_min")
        sp.add_argument("--i-max", type=int, default=None, dest="i_max")
        sp.add_argument("--mesh", type=int, default=None,
                        help="FD mesh size (power of two >= 64)")
        sp.add_argument("--resolution", type=int, default=None,
                        help="distance-field grid resolution per axis")
        sp.add_argument("--out", type=str, default=None, help="output directory")
        sp.add_argument("--tol", action="append", default=[],
                        metavar="KEY=VALUE", help="tolerance override (repeatable)")
        sp.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering next to the CSV")
    return p


def config_from_args(args) -> ExperimentConfig:
    fields: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            fields = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(fields, dict):
            raise ConfigError("config file must hold a JSON object")
    fields["experiment"] = args.experiment
    for key in ("n", "i_min", "i_max", "mesh", "resolution", "out"):
        val = getattr(args, key, None)
        if val is not None:
            fields[key] = val
    tols = dict(fields.get("tolerances", {}))
    for item in args.tol:
        if "=" not in item:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            tols[k] = float(v)
        except ValueError:
            raise ConfigError(f"tolerance value for {k!r} is not a number: {v!r}")
    fields["tolerances"] = tols
    if args.no_figures:
        fields["figures"] = False
    known = {"experiment", "n", "i_min", "i_max", "mesh", "resolution", "out",
             "tolerances", "figures"}
    unknown = set(fields) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
    try:
        return ExperimentConfig(**fields)
    except TypeError as exc:
        raise ConfigError(str(exc))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (NumericalError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_FAILURE

    out_dir = Path(cfg.out)
    paths = result.write(out_dir)
    if cfg.figures:
        try:
            from .figures import render
            paths["figure"] = render(result, out_dir)
        except Exception as exc:  # figure trouble must not mask the verdict
            print(f"warning: figure rendering failed: {exc}", file=sys.stderr)
    for row in result.rows:
        label = row.values.get("case", row.values.get("i", ""))
        status = "pass" if row.passed else "FAIL"
        print(f"[{status}] {cfg.experiment} {label}")
    print(f"wrote {paths['csv']} and {paths['summary']}"
          + (f" and {paths['figure']}" if "figure" in paths else ""))
    return EXIT_PASS if result.passed else EXIT_CHECK_FAILURE


if __name__ == "__main__":
    sys.exit(main())
