"""Command-line entry point.

Subcommands: explore a program's weak traces, check one trace for
consistency, fuzz the explorer against the brute-force reference, and run
the bundled benchmark families.  Standard output is deterministic for
identical invocations; timing lands only in the optional stats file.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional

from .benchmarks import n_writers_program_text, redundant_co_program_text
from .dpor import explore_program
from .errors import (
    CapacityError,
    FormatError,
    InternalInvariantError,
    RatraceError,
)
from .model import Trace, trace_from_json, trace_to_dot, trace_to_json
from .oracle import FuzzSpec, differential_check, generate_program
from .program import parse_program, pretty_print, unroll
from .rachecker import is_ra_consistent

EXIT_OK = 0
EXIT_CONDITION_VIOLATED = 1
EXIT_INPUT_ERROR = 2
EXIT_INCONSISTENT = 3
EXIT_CAPACITY = 4
EXIT_INTERNAL = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratrace",
        description="Enumerate the weak traces of small concurrent programs "
        "under release-acquire semantics.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    explore_p = sub.add_parser("explore", help="enumerate all weak traces")
    explore_p.add_argument("input", help="program file")
    explore_p.add_argument(
        "--unroll", type=int, default=1, metavar="N", help="loop bound (default 1)"
    )
    explore_p.add_argument(
        "--emit",
        choices=("none", "dot", "json"),
        default="none",
        help="write every terminal trace in this format",
    )
    explore_p.add_argument(
        "--out", metavar="DIR", help="directory for emitted traces"
    )
    explore_p.add_argument(
        "--debug-invariants",
        action="store_true",
        help="re-check saturation and consistency after every step",
    )
    explore_p.add_argument(
        "--stats", metavar="PATH", help="write run statistics as JSON"
    )

    check_p = sub.add_parser("check-trace", help="judge one trace's consistency")
    check_p.add_argument("input", help="trace JSON file")

    fuzz_p = sub.add_parser(
        "fuzz", help="differentially test exploration against brute force"
    )
    fuzz_p.add_argument(
        "--seeds", type=int, required=True, metavar="N", help="number of seeds"
    )
    fuzz_p.add_argument(
        "--spec", metavar="PATH", help="JSON file of program-shape bounds"
    )
    fuzz_p.add_argument(
        "--out",
        default="quarantine",
        metavar="DIR",
        help="directory for programs that expose a mismatch",
    )
    fuzz_p.add_argument(
        "--max-events",
        type=int,
        default=None,
        metavar="N",
        help="lower the reference enumerator's event capacity",
    )

    sub.add_parser("bench", help="run the bundled benchmark families")
    return parser


def _trace_file_name(index: int, fmt: str) -> str:
    return f"trace_{index:04d}.{'dot' if fmt == 'dot' else 'json'}"


def _cmd_explore(args: argparse.Namespace) -> int:
    if args.unroll < 1:
        print(f"unroll bound must be >= 1, got {args.unroll}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    if args.emit != "none" and not args.out:
        print("--emit requires --out", file=sys.stderr)
        return EXIT_INPUT_ERROR
    program = parse_program(Path(args.input).read_text())
    if args.unroll > 1:
        program = unroll(program, args.unroll)

    out_dir: Optional[Path] = None
    if args.emit != "none":
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)

    emitted = 0

    def reporter(trace: Trace, key, outcome) -> None:
        nonlocal emitted
        if out_dir is not None:
            path = out_dir / _trace_file_name(emitted, args.emit)
            if args.emit == "dot":
                path.write_text(trace_to_dot(trace))
            else:
                path.write_text(json.dumps(trace_to_json(trace), indent=2) + "\n")
        emitted += 1

    started = time.monotonic()
    stats = explore_program(
        program, reporter=reporter, debug_invariants=args.debug_invariants
    )
    wall_ms = int((time.monotonic() - started) * 1000)

    print(f"traces: {stats.terminal_traces}")
    code = EXIT_OK
    if program.final is not None:
        if program.final.mode == "exists":
            print("YES" if stats.assertion_outcome else "NO")
        else:
            print("OK" if stats.assertion_outcome else "VIOLATED")
            if not stats.assertion_outcome:
                code = EXIT_CONDITION_VIOLATED
    if args.stats:
        payload = {
            "traces": stats.terminal_traces,
            "events": stats.events_executed,
            "schedules_created": stats.schedules_created,
            "schedules_deduplicated": stats.schedules_deduplicated,
            "wall_ms": wall_ms,
        }
        Path(args.stats).write_text(json.dumps(payload, indent=2) + "\n")
    return code


def _cmd_check_trace(args: argparse.Namespace) -> int:
    obj = json.loads(Path(args.input).read_text())
    trace = trace_from_json(obj)
    verdict = is_ra_consistent(trace)
    if verdict.consistent:
        print("CONSISTENT")
        return EXIT_OK
    cycle = list(verdict.witness_cycle or ())
    rendered = " -> ".join(str(e) for e in cycle + cycle[:1])
    print("INCONSISTENT")
    print(f"cycle: {rendered}")
    return EXIT_INCONSISTENT


def _cmd_fuzz(args: argparse.Namespace) -> int:
    if args.seeds < 1:
        print(f"--seeds must be >= 1, got {args.seeds}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    bounds = {}
    if args.spec:
        bounds = json.loads(Path(args.spec).read_text())
        if not isinstance(bounds, dict):
            raise FormatError("fuzz spec must be a JSON object")
    quarantine = Path(args.out)
    mismatches = 0
    for seed in range(args.seeds):
        try:
            spec = FuzzSpec(**{**bounds, "seed": seed})
        except TypeError as exc:
            raise FormatError(f"unknown fuzz spec field: {exc}") from None
        program = generate_program(spec)
        if args.max_events is None:
            report = differential_check(program)
        else:
            report = differential_check(program, max_events=args.max_events)
        if not report.matched:
            mismatches += 1
            quarantine.mkdir(parents=True, exist_ok=True)
            (quarantine / f"seed_{seed:04d}.rap").write_text(pretty_print(program))
    print(f"seeds: {args.seeds}")
    print(f"mismatches: {mismatches}")
    return EXIT_CONDITION_VIOLATED if mismatches else EXIT_OK


def _cmd_bench(_args: argparse.Namespace) -> int:
    rows = []
    for n in range(2, 11):
        stats = explore_program(parse_program(n_writers_program_text(n)))
        rows.append(("n_writers", n, stats.terminal_traces))
    for n in range(1, 7):
        stats = explore_program(parse_program(redundant_co_program_text(n)))
        rows.append(("redundant_co", n, stats.terminal_traces))
    print(f"{'family':<14} {'n':>3} {'traces':>8}")
    for family, n, traces in rows:
        print(f"{family:<14} {n:>3} {traces:>8}")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "explore": _cmd_explore,
        "check-trace": _cmd_check_trace,
        "fuzz": _cmd_fuzz,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.subcommand](args)
    except InternalInvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (FileNotFoundError, json.JSONDecodeError, RatraceError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
