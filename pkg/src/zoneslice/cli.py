"""
This module contains the command line interface: analyze, slice, compare and export-smt.
"""
import argparse
import logging
import sys
from pathlib import Path

from zoneslice.dataflow import DOMAINS, AnalysisError, compute_slices, run_fixpoint
from zoneslice.domains import DomainError
from zoneslice.harness import (
    DEFAULT_BOX,
    TARGETS,
    HarnessError,
    emit_smtlib,
    plot_reductions,
    report_to_json,
    run_comparison,
)
from zoneslice.ir_frontend import ParseError, build_cfg, read_program
from zoneslice.minimizer import MinimizerError, MinMethod, dump_subgraph
from zoneslice.utils import label_to_filename
from zoneslice.zone import ZoneError

PACKAGE_ERRORS = (ZoneError, MinimizerError, DomainError, ParseError, AnalysisError, HarnessError, OSError)


def _comma_list(allowed):
    def parse(text):
        items = [item.strip() for item in text.split(",") if item.strip()]
        unknown = [item for item in items if item not in allowed]
        if unknown or not items:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(allowed)}")
        return items

    return parse


def build_parser() -> argparse.ArgumentParser:
    """This function declares the sub-commands and their flags."""
    parser = argparse.ArgumentParser(prog="zoneslice", description="Zone invariants and their minimal changed sets")
    parser.add_argument("--verbose", action="store_true", help="log debug messages")
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", help="print the invariant at every program point")
    analyze.add_argument("file", type=Path)
    analyze.add_argument("--domain", choices=DOMAINS, default="zones")
    analyze.add_argument("--dump", action="store_true", help="also print the control flow graph")
    analyze.add_argument("--trace", action="store_true", help="print one line per worklist step")

    slicer = commands.add_parser("slice", help="print the Zone selection of a minimization method")
    slicer.add_argument("file", type=Path)
    slicer.add_argument("--method", choices=[method.value for method in MinMethod], default="mn")
    slicer.add_argument("--point", help="only this program point, e.g. B1->B2")
    variant = slicer.add_mutually_exclusive_group()
    variant.add_argument("--closed", dest="closed", action="store_true", default=True)
    variant.add_argument("--arbitrary", dest="closed", action="store_false")

    compare = commands.add_parser("compare", help="compare Zones with other domains over a directory of programs")
    compare.add_argument("directory", type=Path)
    compare.add_argument("--against", type=_comma_list(TARGETS), default=list(TARGETS))
    compare.add_argument("--methods", type=_comma_list([m.value for m in MinMethod]), default=["fs", "cc", "nn", "mn"])
    compare.add_argument("--box", type=int, default=DEFAULT_BOX)
    compare.add_argument("--report", type=Path, help="write the report as JSON")
    compare.add_argument("--plot", type=Path, help="save a bar chart of the reductions")

    export = commands.add_parser("export-smt", help="write SMT-LIB2 files of every program point")
    export.add_argument("file", type=Path)
    export.add_argument("--out", type=Path, required=True)
    return parser


def _analyze(args):
    cfg = build_cfg(read_program(args.file))
    if args.dump:
        print(cfg)
    result = run_fixpoint(cfg, args.domain, trace=print if args.trace else None)
    print(result.dump(), end="")


def _slice(args):
    cfg = build_cfg(read_program(args.file))
    result = run_fixpoint(cfg, "zones", closed=args.closed)
    points = [result.point(args.point)] if args.point else result.points
    for point in points:
        print(f"# point {point.label}")
        print(dump_subgraph(compute_slices(point, args.closed)[MinMethod(args.method)]))


def _compare(args):
    methods = [MinMethod(method) for method in args.methods]
    _, report = run_comparison(args.directory, args.against, methods, args.box)
    text = report_to_json(report)
    if args.report:
        args.report.write_text(text, encoding="utf-8")
    if args.plot:
        plot_reductions(report, args.plot)
    print(text, end="")


def _export(args):
    cfg = build_cfg(read_program(args.file))
    args.out.mkdir(parents=True, exist_ok=True)
    count = 0
    for domain in DOMAINS:
        for point in run_fixpoint(cfg, domain).points:
            state = point.slices[MinMethod.FS] if domain == "zones" else point.after
            emit_smtlib(state, args.out / f"{cfg.name}.{label_to_filename(point.label)}.{domain}.smt2")
            count += 1
    print(f"Wrote {count} SMT-LIB files to {args.out}")


COMMANDS = {"analyze": _analyze, "slice": _slice, "compare": _compare, "export-smt": _export}


def main(argv=None) -> int:
    """
    This function runs the command line interface.
    :param argv: arguments without the program name, sys.argv by default
    :return: 0 on success, 1 on an analysis or file error, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return 0 if error.code == 0 else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except PACKAGE_ERRORS as error:
        print(f"zoneslice: {error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
