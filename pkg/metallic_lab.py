"""
metallic_lab.py
CLASSIFICATION: Command-Line Entry Point
GOAL: argparse front end of the engine.  Resolves the scenario, dispatches
      to core_engine, prints the rendered report to stdout and returns the
      exit code of the sentinel contract (0 pass, 1 failure, 2 input error).

    metallic-lab analyze example1
    metallic-lab verify --builtin example2 --checks E99,E100 --samples 500
    metallic-lab angle-sweep example1 --var t --grid 0.1:1.4:14 --format csv
"""
import argparse
import logging
import sys
from typing import Dict, List, Optional

import settings
from core_engine import (
    cmd_analyze,
    cmd_angle_sweep,
    cmd_builtin_list,
    cmd_verify,
    emit,
    parse_grid,
    resolve_source,
    save_samples,
    write_provenance,
)
from modules.core_numerics.exprdsl import eval_value, parse
from modules.errors import MetallicLabError

log = logging.getLogger("metallic_lab")

COMMANDS = ("analyze", "verify", "angle-sweep", "builtin-list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metallic-lab",
        description="Hemi-slant submanifolds of metallic Riemannian manifolds: "
                    "classification, slant angles and identity checks.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("target", nargs="?", help="builtin name or scenario file")
    parser.add_argument("--scenario", metavar="PATH", help="scenario file (TOML or JSON)")
    parser.add_argument("--builtin", metavar="NAME", help="builtin scenario name")
    parser.add_argument("--structure", choices=("j", "jbar"), default="j",
                        help="builtin only: jbar selects the second metallic structure")
    parser.add_argument("--p", type=int, help="override the structure parameter p")
    parser.add_argument("--q", type=int, help="override the structure parameter q")
    parser.add_argument("--const", action="append", default=[], metavar="NAME=VALUE",
                        help="override a scenario constant (repeatable; VALUE may be an expression)")

    parser.add_argument("--checks", help="comma list of check ids, or 'all'")
    parser.add_argument("--samples", type=int, help="sample points per check")
    parser.add_argument("--seed", type=int, help=f"random seed (default {settings.DEFAULT_SEED}, "
                                                 f"env {settings.SEED_ENV_VAR})")

    parser.add_argument("--var", help="angle-sweep: constant to vary")
    parser.add_argument("--grid", help="angle-sweep: start:stop:count or a comma list")
    parser.add_argument("--distribution", help="angle-sweep: distribution to measure (default: first)")

    parser.add_argument("--format", choices=settings.REPORT_FORMATS, default="text")
    parser.add_argument("--output", metavar="PATH", help="also write the report to PATH")
    parser.add_argument("--save-samples", metavar="PATH", help="verify: archive per-sample residuals (HDF5)")
    parser.add_argument("--provenance", action="store_true",
                        help=f"record the JSON report under {settings.PROVENANCE_DIR.name}/")

    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    noise.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def parse_consts(items: List[str]) -> Dict[str, float]:
    consts: Dict[str, float] = {}
    for item in items:
        name, sep, expr = item.partition("=")
        name = name.strip()
        if not sep or not name or not expr.strip():
            raise MetallicLabError(f"--const expects NAME=VALUE, got {item!r}")
        consts[name] = eval_value(parse(expr.strip(), ()), {})
    return consts


def run(args: argparse.Namespace) -> int:
    if args.command == "builtin-list":
        report = cmd_builtin_list()
    else:
        source = resolve_source(args.target, args.scenario, args.builtin, args.structure)
        consts = parse_consts(args.const)
        if args.command == "angle-sweep":
            if not args.var or not args.grid:
                raise MetallicLabError("angle-sweep needs --var and --grid")
            source = source.overridden(p=args.p, q=args.q, consts=consts)
            report = cmd_angle_sweep(source, args.var, parse_grid(args.grid), seed=args.seed,
                                     distribution=args.distribution)
        else:
            scn = source.build(p=args.p, q=args.q, consts=consts)
            if args.command == "analyze":
                report = cmd_analyze(scn)
            else:
                checks = [c for c in args.checks.split(",") if c.strip()] if args.checks else None
                report = cmd_verify(scn, checks, samples=args.samples, seed=args.seed)

    sys.stdout.write(emit(report, args.format, args.output))
    if args.save_samples:
        save_samples(report, args.save_samples)
    if args.provenance:
        write_provenance(report)
    return report.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format=settings.LOG_FORMAT, stream=sys.stderr)
    try:
        return run(args)
    except MetallicLabError as exc:
        log.error(f"[CLI] {exc}")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
