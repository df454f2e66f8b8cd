"""Command-line entry point: ``mecgame {generate,simulate,sweep,analyze,check}``.

Exit codes: 0 success or convergence, 1 failed property check, 2 dynamics
hit ``--max-rounds`` without converging, 3 invalid input, 4 instance too
large for the enumeration oracles.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import EnumerationGuardError
from .checks import SUITES, UnknownSuiteError, run_suite
from .dynamics import UpdateSchedule
from .experiments import analyze, simulate, sweep
from .scenario import SpecError, build_scenario, load_spec, scenario_to_spec

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_INVALID = 3
EXIT_GUARD = 4

SCHEDULES = {"round_robin": "round_robin", "random": "random_permutation", "simultaneous": "simultaneous"}

def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="placement and schedule seed (default: the scenario file's generator seed)")
    p.add_argument("--out", type=Path, required=True, help=out_help)


def _dynamics_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schedule", choices=sorted(SCHEDULES), default="random")
    p.add_argument("--max-rounds", type=int, default=500)


def _parse_grid(text: str) -> tuple[str, list]:
    name, sep, values = text.partition("=")
    if not sep or not values:
        raise argparse.ArgumentTypeError("expected NAME=v1,v2,...")
    try:
        cast = int if name in ("N", "num_users") else float
        return name, [cast(v) for v in values.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid value in '{text}'") from None


def _parse_seeds(text: str) -> list[int]:
    try:
        if "-" in text.strip("-"):
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("seeds must be 'a-b' or a comma list") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mecgame", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mecgame {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="expand a generator spec into an explicit-users scenario file")
    p.add_argument("spec", type=Path)
    _common(p, "output scenario file (JSON)")

    p = sub.add_parser("simulate", help="run best-response dynamics, write trace.csv and summary.csv")
    p.add_argument("spec", type=Path)
    _common(p, "output directory")
    _dynamics_flags(p)

    p = sub.add_parser("sweep", help="simulate a grid of N or task_bits values over many seeds")
    p.add_argument("spec", type=Path, help="template spec with a generator block")
    p.add_argument("--vary", type=_parse_grid, required=True, help="N=8,12,16 or task_bits=5e6,1e7")
    p.add_argument("--seeds", type=_parse_seeds, default=list(range(20)), help="'0-19' or '1,5,9'")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _dynamics_flags(p)

    p = sub.add_parser("analyze", help="PoA, PoA bound and Pareto verdict for a converged trace")
    p.add_argument("spec", type=Path)
    p.add_argument("trace", type=Path, help="trace.csv written by simulate")
    _common(p, "output directory")

    p = sub.add_parser("check", help="run a property suite and print a JSON report")
    p.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on the instance counts")
    p.add_argument("--out", type=Path, default=None, help="also write the report to this file")
    return parser


def _schedule(args, seed: int | None) -> UpdateSchedule:
    return UpdateSchedule(SCHEDULES[args.schedule], seed if seed is not None else 0)


def _run(args) -> int:
    if args.command == "generate":
        spec = load_spec(args.spec)
        explicit = scenario_to_spec(build_scenario(spec, args.seed))
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(explicit.model_dump_json(indent=2, exclude_none=True) + "\n", encoding="utf-8")
        return EXIT_OK

    if args.command == "simulate":
        if args.max_rounds < 1:
            raise SpecError("--max-rounds must be at least 1")
        spec = load_spec(args.spec)
        result = simulate(spec, args.out, _schedule(args, args.seed), args.seed, args.max_rounds)
        final = result.trace.final
        print(f"rounds={result.trace.rounds_to_converge} converged={result.converged} "
              f"offloaders={final.offloader_count} potential={final.potential!r}")
        return EXIT_OK if result.converged else EXIT_NOT_CONVERGED

    if args.command == "sweep":
        spec = load_spec(args.spec)
        variable, values = args.vary
        path = sweep(spec, variable, values, args.seeds, args.out, SCHEDULES[args.schedule],
                     args.max_rounds, args.jobs)
        print(path)
        return EXIT_OK

    if args.command == "analyze":
        spec = load_spec(args.spec)
        path, report = analyze(spec, args.trace, args.out, args.seed)
        print(f"poa={report.poa!r} upper_bound={report.upper_bound!r} -> {path}")
        return EXIT_OK

    if args.command == "check":
        report = run_suite(args.suite, args.seed, args.scale)
        text = json.dumps(report.to_dict(), indent=2, allow_nan=True)
        print(text)
        if args.out is not None:
            args.out.write_text(text + "\n", encoding="utf-8")
        return EXIT_OK if report.passed else EXIT_CHECK_FAILED
    raise AssertionError(args.command)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which would collide with non-convergence
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except EnumerationGuardError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_GUARD
    except (SpecError, UnknownSuiteError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
