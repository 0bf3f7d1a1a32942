"""Command line entry point: ``monotone-ce {design,curves,type1,compare} CONFIG``.

Exit codes: 0 success, 2 config/validation error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from . import __version__
from .errors import NumericalError, SpecError
from .report import (
    REPORT_DIR_ENV,
    compare_objectives,
    emit_curves,
    emit_report,
    parse_config,
    report_json,
    run_design,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class InputError(ValueError):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"not a comma separated list of numbers: {text!r}") from None


def _null_deltas(text: str) -> list[float]:
    deltas = _float_list(text)
    if any(d > 0 for d in deltas):
        raise InputError("--deltas must all be <= 0")
    return sorted(deltas)


def _cmd_design(args) -> None:
    spec, tol = parse_config(args.config)
    deltas = _null_deltas(args.deltas) if args.deltas else []
    effects = _float_list(args.effects) if args.effects else None
    report = run_design(spec, tol, deltas=deltas, effects=effects)
    out = args.out
    if out is None and os.environ.get(REPORT_DIR_ENV):
        out = Path(os.environ[REPORT_DIR_ENV]) / (Path(args.config).stem + ".report.json")
    if out is None:
        sys.stdout.write(report_json(report))
    else:
        emit_report(report, out)
        print(f"report written to {out}")


def _cmd_curves(args) -> None:
    spec, tol = parse_config(args.config)
    if not args.grid_step > 0:
        raise InputError("--grid-step must be positive")
    report = run_design(spec, tol)
    emit_curves(report, args.grid_step, args.out, tol)
    print(f"curves written to {args.out}")


def _cmd_type1(args) -> None:
    from .ce import optimal_ce
    from .type1 import type1_scan

    spec, tol = parse_config(args.config)
    rows = type1_scan(optimal_ce(spec, tol), spec, _null_deltas(args.deltas), tol)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["delta", "first_stage_reject", "second_stage_mass", "exact_total", "bound_total"])
    for r in rows:
        writer.writerow([repr(r.delta), repr(r.first_stage_reject), repr(r.second_stage_mass),
                         repr(r.exact_total), repr(r.bound_total)])


def _cmd_compare(args) -> None:
    spec, tol = parse_config(args.config)
    values = compare_objectives(spec, tol)
    print(f"{'ce function':<16}objective")
    for name, value in values.items():
        print(f"{name:<16}{value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monotone-ce",
        description="Optimal non-decreasing conditional error functions for two-stage designs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="run the full pipeline and emit a JSON report")
    p.add_argument("config")
    p.add_argument("--out", help=f"report path (default: ${REPORT_DIR_ENV}/<config>.report.json or stdout)")
    p.add_argument("--deltas", help="comma separated null effects <= 0 for the type I table, e.g. --deltas=-0.5,0")
    p.add_argument("--effects", help="comma separated effects for expected sample sizes")
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("curves", help="write the curve table (CSV)")
    p.add_argument("config")
    p.add_argument("--grid-step", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_curves)

    p = sub.add_parser("type1", help="type I error audit table (CSV on stdout)")
    p.add_argument("config")
    p.add_argument("--deltas", required=True, help="e.g. --deltas=-1,-0.5,-0.2,0")
    p.set_defaults(func=_cmd_type1)

    p = sub.add_parser("compare", help="objectives of monotone, unconstrained and flat CE functions")
    p.add_argument("config")
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (SpecError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
