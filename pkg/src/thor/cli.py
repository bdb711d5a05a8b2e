"""Command-line front end.

    thor run FILE --goal GOAL [options]
    thor bench [--suite NAMES] [--workers LIST] [--repeat R] [--csv PATH] [options]

`run` exits with 0 when the goal has at least one solution, 1 when it has
none and 2 on any error.  `bench` exits with 0, or 2 on an error such as
an unknown benchmark name.
"""
from __future__ import annotations

import argparse
import os
import sys

from .bench import format_table, run_benchmark, select_benchmarks, summarize, write_csv
from .engine import PrologError, Program
from .memory import Capacities, StackOverflow
from .orframes import FrameTableFull
from .reader import ConsultError, ReaderError, consult_file, parse_goal
from .runtime import BACKENDS, COPY_MODES, MODES, TeamConfig, TeamError, run_sequential, run_team
from .scheduler import MOVE_STRATEGIES, WAIT_POLICIES, SchedulerConfig
from .terms import format_term

EXIT_OK, EXIT_NO, EXIT_ERROR = 0, 1, 2
ENGINE_ERRORS = (PrologError, StackOverflow, FrameTableFull, TeamError)


def worker_list(text: str) -> list[int]:
    try:
        counts = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a worker list: {text!r}") from None
    if not counts or any(not 0 <= n <= 64 for n in counts):
        raise argparse.ArgumentTypeError(f"worker counts must be in 0..64: {text!r}")
    return counts


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=worker_list, default=os.environ.get("THOR_WORKERS", "1"),
                   help="worker count (bench: comma list); 0 runs the plain sequential "
                        "engine; default $THOR_WORKERS or 1")
    p.add_argument("--mode", choices=MODES, default="all")
    p.add_argument("--copy", choices=COPY_MODES, default="incremental")
    p.add_argument("--wait", choices=WAIT_POLICIES, default="spin")
    p.add_argument("--delta", type=int, default=1, help="least load worth sharing")
    p.add_argument("--move", choices=MOVE_STRATEGIES, default="nearest")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--backend", choices=BACKENDS, default="process")
    p.add_argument("--heap", type=int, default=Capacities.heap, metavar="CELLS")
    p.add_argument("--cps", type=int, default=Capacities.cps, metavar="CELLS")
    p.add_argument("--trail", type=int, default=Capacities.trail, metavar="CELLS")
    p.add_argument("--stats", action="store_true", help="print per-worker statistics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thor", description="Or-parallel Prolog engine.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="solve one goal")
    run.add_argument("file")
    run.add_argument("--goal", required=True)
    _common(run)
    bench = sub.add_parser("bench", help="run the benchmark suite")
    bench.add_argument("--suite", default="", help="comma list of benchmarks; default all")
    bench.add_argument("--repeat", type=int, default=5)
    bench.add_argument("--csv", default=None, metavar="PATH")
    bench.add_argument("--reduced", action="store_true", help="use the small goal of each benchmark")
    _common(bench)
    return parser


def team_config(args, workers: int) -> TeamConfig:
    sched = SchedulerConfig(delta=args.delta, move=args.move, wait=args.wait)
    caps = Capacities(args.heap, args.cps, args.trail)
    return TeamConfig(workers=max(workers, 1), mode=args.mode, copy=args.copy, sched=sched,
                      caps=caps, seed=args.seed, backend=args.backend)


def _error(msg: str) -> int:
    print(f"thor: error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def cmd_run(args) -> int:
    workers = args.workers[0]
    try:
        cfg = team_config(args, workers)
        program = Program(consult_file(args.file))
        goals = parse_goal(args.goal)
        if workers == 0:
            sols, stats = run_sequential(program, goals, args.mode, cfg.caps)
        else:
            sols, stats = run_team(program, goals, cfg)
    except (ReaderError, ConsultError) as exc:
        return _error(f"syntax: {exc}")
    except (OSError, ValueError) as exc:
        return _error(str(exc))
    except ENGINE_ERRORS as exc:
        return _error(f"{type(exc).__name__}: {exc}")
    if args.mode == "first":
        sols = sols[:1]
    for s in sols:
        b = s.bindings
        print(", ".join(f"{k} = {format_term(v, 699)}" for k, v in b.items()) if b else "true")
    if not sols:
        print("false")
    print(f"% {len(sols)} solution{'s' if len(sols) != 1 else ''} in {stats.wall_time:.3f} s"
          f" (workers {workers}, mode {args.mode}, copy {stats.copy}, sharing_ops "
          f"{stats.sharing_ops}, cells_copied {stats.cells_copied}, idle_ms {stats.idle_ms:.1f})")
    if args.stats:
        print_worker_stats(stats)
    return EXIT_OK if sols else EXIT_NO


def print_worker_stats(stats) -> None:
    cols = ("worker", "alternatives", "calls", "solutions", "shares_given", "shares_received",
            "cells_copied_incremental", "cells_copied_full", "installs", "getwork_calls",
            "idle_time")
    print("% " + " ".join(cols))
    for w in stats.workers:
        vals = [getattr(w, c) for c in cols]
        print("% " + " ".join(f"{v:.3f}" if isinstance(v, float) else str(v) for v in vals))


def cmd_bench(args) -> int:
    names = [n.strip() for n in args.suite.split(",") if n.strip() and n.strip() != "all"]
    try:
        benches = select_benchmarks(names)
    except KeyError as exc:
        return _error(exc.args[0])
    if args.repeat < 1:
        return _error("--repeat must be at least 1")
    workers = [n for n in args.workers if n > 0]
    if not workers:
        return _error("--workers needs at least one positive count")
    rows = []

    def progress(r) -> None:
        who = "seq" if r.workers == 0 else f"{r.workers}w"
        print(f"  {r.benchmark} {who} run {r.run}: {r.time_s:.3f} s, {r.solutions} solutions",
              file=sys.stderr)

    try:
        cfg = team_config(args, 1)
        for b in benches:
            rows.extend(run_benchmark(b, workers, args.repeat, cfg, args.reduced, progress))
    except (OSError, ValueError) as exc:
        return _error(str(exc))
    except ENGINE_ERRORS as exc:
        return _error(f"{type(exc).__name__}: {exc}")
    print(format_table(summarize(rows)))
    if args.csv:
        write_csv(args.csv, rows)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if isinstance(args.workers, str):
        try:
            args.workers = worker_list(args.workers)
        except argparse.ArgumentTypeError as exc:
            return _error(f"THOR_WORKERS: {exc}")
    if args.command == "run":
        return cmd_run(args)
    return cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
