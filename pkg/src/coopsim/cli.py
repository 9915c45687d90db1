"""Command-line entry point.

Exit status: 0 success, 2 usage error, 3 invalid or unreadable config,
4 unknown preset, 5 unwritable output, 6 oracle failure, 7 metric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .engine import check_config, run
from .errors import ConfigError, MetricError, OracleError
from .experiments import (DEFAULT_REPLICATIONS, PRESETS, UnknownPresetError, rows_csv_text,
                          rows_json_text, run_preset)
from .metrics import summarize, summary_json_text, trace_csv_text
from .model import load_config, validate_config
from .oracle import FluidInstance, load_instance, solve_fluid

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_PRESET = 4
EXIT_OUTPUT = 5
EXIT_ORACLE = 6
EXIT_METRIC = 7


class OutputError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopsim",
        description="Slotted simulator for device- and source-centric cooperative streaming.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, jobs=False):
        p.add_argument("--seed", type=int, default=None, help="override the random seed")
        p.add_argument("--horizon", type=_positive_int, default=None,
                       help="override the number of slots")
        p.add_argument("--out-dir", type=Path, default=Path("."),
                       help="directory for output files (created if missing)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if jobs:
            p.add_argument("--jobs", type=_positive_int, default=1,
                           help="parallel simulation processes")

    p_run = sub.add_parser("run", help="simulate one config file")
    p_run.add_argument("config", type=Path)
    common(p_run)

    p_preset = sub.add_parser("preset", help="run a named sweep")
    p_preset.add_argument("name", help="one of: " + ", ".join(PRESETS))
    p_preset.add_argument("--replications", type=_positive_int, default=DEFAULT_REPLICATIONS)
    common(p_preset, jobs=True)

    p_oracle = sub.add_parser("oracle", help="solve the fluid program for an instance")
    p_oracle.add_argument("instance", type=Path,
                          help="JSON instance file, or a config file")

    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("config", type=Path)
    return parser


def _prepare_out_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".coopsim-write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable: {exc.strerror or exc}")
    return path


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}")


def _cmd_run(args) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    config = config.replace(**overrides)
    check_config(config)
    out_dir = _prepare_out_dir(args.out_dir)
    trace = run(config)
    stem = args.config.stem
    if args.format == "csv":
        target = out_dir / f"{stem}_trace.csv"
        _write(target, trace_csv_text(trace))
    else:
        target = out_dir / f"{stem}_summary.json"
        _write(target, summary_json_text(summarize(trace)))
    print(target)
    return EXIT_OK


def _cmd_preset(args) -> int:
    if args.name not in PRESETS:
        raise UnknownPresetError(
            f"unknown preset {args.name!r}; known presets: {', '.join(PRESETS)}")
    out_dir = _prepare_out_dir(args.out_dir)
    rows = run_preset(args.name, seed=0 if args.seed is None else args.seed,
                      replications=args.replications, horizon=args.horizon, jobs=args.jobs)
    if args.format == "csv":
        target = out_dir / f"{args.name}.csv"
        _write(target, rows_csv_text(rows))
    else:
        target = out_dir / f"{args.name}.json"
        _write(target, rows_json_text(rows))
    print(target)
    return EXIT_OK


def _load_oracle_instance(path: Path) -> FluidInstance:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OracleError(f"cannot read instance file {path}: {exc.strerror or exc}") from exc
    if text.lstrip().startswith("{"):
        return load_instance(path)
    return FluidInstance.from_config(load_config(path))


def _cmd_oracle(args) -> int:
    solution = solve_fluid(_load_oracle_instance(args.instance))
    print(json.dumps(solution.to_dict(), indent=2))
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    problems = validate_config(config)
    if problems:
        raise ConfigError(f"{args.config}: " + "; ".join(problems))
    print(f"{args.config}: ok")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "preset": _cmd_preset, "oracle": _cmd_oracle,
            "validate": _cmd_validate}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UnknownPresetError as exc:
        print(f"coopsim: error: {exc.args[0]}", file=sys.stderr)
        return EXIT_PRESET
    except ConfigError as exc:
        print(f"coopsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"coopsim: output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except OracleError as exc:
        print(f"coopsim: oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except MetricError as exc:
        print(f"coopsim: metric error: {exc}", file=sys.stderr)
        return EXIT_METRIC


if __name__ == "__main__":
    sys.exit(main())
