"""Command-line entry point: ``morphin run | validate-config | ph-trace``.

Exit codes: 0 success, 2 config or input error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from pathlib import Path

from morphin.config import CANNED, ConfigError, dump_spec, load_spec, parse_override
from morphin.drift import Direction, PageHinkleyConfig, write_trace
from morphin.harness import TrialAborted, run_experiment
from morphin.qcore import ContractViolation
from morphin.results import build_summary, format_table, write_results

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3

log = logging.getLogger("morphin")


class InputError(ValueError):
    """Malformed user input outside of experiment configs."""


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {v} is outside the unsigned 64-bit range")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="morphin", description="Drift-aware tabular Q-learning experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def spec_args(sp):
        sp.add_argument(
            "--config", required=True,
            help=f"YAML config path or bundled name ({', '.join(CANNED)})",
        )
        sp.add_argument("--trials", type=_positive_int)
        sp.add_argument("--episodes", type=_positive_int)
        sp.add_argument("--seed", type=_seed, help="base seed (unsigned 64-bit)")
        sp.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="override a config field by dotted path, e.g. morphin.ph.threshold_h=200 (repeatable)",
        )

    run = sub.add_parser("run", help="run both agents and write results")
    spec_args(run)
    run.add_argument("--out", required=True, type=Path, help="output directory")
    run.add_argument("--parallelism", type=_positive_int, default=1, help="worker processes")

    val = sub.add_parser("validate-config", help="check a config and print the resolved spec")
    spec_args(val)

    ph = sub.add_parser("ph-trace", help="run the Page-Hinkley detector over a CSV column")
    ph.add_argument("--input", required=True, type=Path, help="CSV file with a header row")
    ph.add_argument("--column", default="reward", help="column name or 0-based index (default: reward)")
    ph.add_argument("--out", type=Path, help="trace CSV path (default: stdout)")
    defaults = PageHinkleyConfig()
    ph.add_argument("--delta", type=float, default=defaults.delta)
    ph.add_argument("--threshold-h", type=float, default=defaults.threshold_h)
    ph.add_argument("--direction", choices=[d.value for d in Direction], default=defaults.direction.value)
    ph.add_argument("--min-samples", type=int, default=defaults.min_samples)
    ph.add_argument("--no-reset", action="store_true", help="keep accumulating after an alarm")
    return p


def _load(args):
    overrides = [parse_override(o) for o in args.overrides]
    for flag, key in (("trials", "trials"), ("episodes", "episodes"), ("seed", "base_seed")):
        value = getattr(args, flag)
        if value is not None:
            overrides.append((key, value))
    return load_spec(args.config, overrides)


def cmd_validate(args) -> int:
    spec = _load(args)
    sys.stdout.write(dump_spec(spec))
    return EXIT_OK


def cmd_run(args) -> int:
    spec = _load(args)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("running %s: %d trials x %d episodes", spec.scenario, spec.trials, spec.episodes)
    start = time.perf_counter()
    records = run_experiment(spec, parallelism=args.parallelism)
    log.info("finished in %.1fs", time.perf_counter() - start)
    doc = build_summary(spec, records)
    write_results(out, spec, records, doc)
    print(f"{spec.scenario}: {spec.trials} trials x {spec.episodes} episodes (seed {spec.base_seed})")
    print(format_table(doc["summary"]))
    print(f"results written to {out}")
    return EXIT_OK


def read_column(path: Path, column: str) -> list[float]:
    """Values of one CSV column; lines starting with ``#`` are skipped."""
    if not Path(path).is_file():
        raise InputError(f"{path}: file not found")
    text = Path(path).read_text()
    rows = list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))
    rows = [r for r in rows if r]
    if not rows:
        raise InputError(f"{path}: no header row")
    header = rows[0]
    if column in header:
        idx = header.index(column)
    elif column.isdigit() and int(column) < len(header):
        idx = int(column)
    else:
        raise InputError(f"{path}: no column {column!r} (have {', '.join(header)})")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            x = float(row[idx])
        except (IndexError, ValueError):
            raise InputError(f"{path}: row {lineno}: cannot read a number from column {header[idx]!r}") from None
        if not math.isfinite(x):
            raise InputError(f"{path}: row {lineno}: non-finite value {row[idx]!r}")
        values.append(x)
    return values


def cmd_ph_trace(args) -> int:
    cfg = PageHinkleyConfig(args.delta, args.threshold_h, args.direction, args.min_samples)
    values = read_column(args.input, args.column)
    if args.out is None:
        alarms = write_trace(values, cfg, sys.stdout, reset_on_drift=not args.no_reset, header_comment=True)
    else:
        with open(args.out, "w", newline="") as fh:
            alarms = write_trace(values, cfg, fh, reset_on_drift=not args.no_reset, header_comment=True)
    print(f"{len(values)} samples, alarms at {alarms if alarms else 'none'}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate-config": cmd_validate, "ph-trace": cmd_ph_trace}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ContractViolation, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TrialAborted as exc:
        print(f"error: trial aborted: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
