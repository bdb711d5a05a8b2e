"""Team lifecycle: start the workers, collect solutions, gather statistics.

Two backends share all of the machinery.  ``process`` (the default) forks
one process per worker, so workers run truly in parallel; stacks, or-frames
and the board live in shared anonymous mappings created before the fork.
``thread`` runs the same workers as threads of the calling process, which
is convenient for debugging and needs no fork.
"""
from __future__ import annotations

import multiprocessing as mp
import queue as queue_mod
import threading
import time
import traceback
from dataclasses import dataclass, field

from .engine import Machine, Program, decode_answer
from .memory import Capacities, WorkerMemory
from .orframes import DEFAULT_FRAMES, OrFrameTable
from .reader import PredicateTable
from .scheduler import BUSY_STATE, S_STATE, Board, SchedulerConfig
from .terms import Term
from .worker import Worker, WorkerStats

BACKENDS = ("process", "thread")
MODES = ("all", "first")
COPY_MODES = ("incremental", "full")


class TeamError(RuntimeError):
    """A worker failed; carries the worker's error text."""


@dataclass
class TeamConfig:
    workers: int = 1
    mode: str = "all"
    copy: str = "incremental"
    sched: SchedulerConfig = field(default_factory=SchedulerConfig)
    caps: Capacities = field(default_factory=Capacities)
    seed: int | None = None
    backend: str = "process"
    debug: bool = False
    queue_size: int = 4096
    batch: int = 256
    frames: int = DEFAULT_FRAMES

    def __post_init__(self) -> None:
        if not 1 <= self.workers <= 64:
            raise ValueError("worker count must be in 1..64")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.copy not in COPY_MODES:
            raise ValueError(f"unknown copy mode {self.copy!r}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")


class Solution:
    """One answer: the query variables' values, who found it, and arrival order.

    The answer is held in its compact cell encoding and turned into terms
    on first access.
    """

    __slots__ = ("key", "worker", "seq", "_program", "_names", "_bindings")

    def __init__(self, key: tuple, worker: int, seq: int, program: Program, names: list[str]):
        self.key = key
        self.worker = worker
        self.seq = seq
        self._program = program
        self._names = names
        self._bindings = None

    @property
    def bindings(self) -> dict[str, Term]:
        if self._bindings is None:
            self._bindings = decode_answer(self._program, self._names, self.key)
        return self._bindings

    def __repr__(self) -> str:
        return f"Solution(worker={self.worker}, seq={self.seq}, bindings={self.bindings})"


@dataclass
class RunStats:
    wall_time: float
    workers: list[WorkerStats]
    mode: str = "all"
    copy: str = "incremental"
    # or-frames still allocated after shutdown; 0 unless something leaked
    frames_live: int = 0

    def total(self, name: str):
        return sum(getattr(w, name) for w in self.workers)

    @property
    def sharing_ops(self) -> int:
        return self.total("shares_received")

    @property
    def cells_copied(self) -> int:
        return self.total("cells_copied_incremental") + self.total("cells_copied_full")

    @property
    def alternatives(self) -> int:
        return self.total("alternatives")

    @property
    def idle_ms(self) -> float:
        return 1000.0 * self.total("idle_time")

    @property
    def solutions(self) -> int:
        return self.total("solutions")


@dataclass(frozen=True)
class SpeedupRecord:
    baseline: float
    time: float
    speedup: float
    overhead: float | None = None


def stats_report(stats: RunStats | list[RunStats], baseline: RunStats | list[RunStats],
                 team_of_one: RunStats | list[RunStats] | None = None) -> SpeedupRecord:
    """Average speedup of `stats` over the sequential `baseline`.

    With `team_of_one`, also the single-worker overhead over the baseline.
    """
    t = _mean(stats)
    b = _mean(baseline)
    over = _mean(team_of_one) / b if team_of_one is not None else None
    return SpeedupRecord(b, t, b / t, over)


def _mean(runs) -> float:
    if isinstance(runs, RunStats):
        return runs.wall_time
    runs = list(runs)
    return sum(r.wall_time for r in runs) / len(runs)


def _as_program(program) -> Program:
    return program if isinstance(program, Program) else Program(program)


def query_names(program: Program, goals: list[Term]) -> list[str]:
    tmpl = program.compile(None, goals, query=True)
    return [n for n in tmpl.varpos if not n.startswith("_")]


# ---- sequential baseline -----------------------------------------------------
def run_sequential(program: Program | PredicateTable, goals: list[Term], mode: str = "all",
                   caps: Capacities | None = None) -> tuple[list[Solution], RunStats]:
    """The plain engine with the same answer collection as a team."""
    program = _as_program(program)
    names = query_names(program, goals)
    m = Machine(program, caps=caps)
    keys: list = []
    m.solution_found = lambda: keys.append(m.encode_answer())
    t0 = time.perf_counter()
    m.load_query(goals)
    m.first = mode == "first"
    m.run()
    wall = time.perf_counter() - t0
    st = WorkerStats(0, calls=m.calls, alternatives=m.alternatives,
                     choicepoints=m.choicepoints, solutions=m.solutions)
    sols = [Solution(k, 0, i, program, names) for i, k in enumerate(keys)]
    return sols, RunStats(wall, [st], mode, "sequential")


# ---- the team ---------------------------------------------------------------------
def _worker_entry(w: Worker, goals, results) -> None:
    try:
        st = w.main(goals)
        results.put(("ok", w.worker, st))
    except BaseException as exc:  # noqa: BLE001  reported to the parent
        from .scheduler import G_ERROR, G_STOP

        w.board.gset(G_ERROR, 1)
        w.board.gset(G_STOP, 1)
        w.board.wake_all()
        results.put(("error", w.worker, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"))
    finally:
        if w.emit is not None:
            w.emit(None)


def collect(source, producers: int, program: Program, names: list[str], out: list) -> None:
    """Drain batches from `source` until every producer has signed off.

    Items are ``(worker, [encoded answers])`` batches or None end markers;
    sequence numbers follow arrival order.
    """
    done = 0
    seq = len(out)
    while done < producers:
        item = source.get()
        if item is None:
            done += 1
            continue
        worker, batch = item
        for key in batch:
            out.append(Solution(key, worker, seq, program, names))
            seq += 1


def run_team(program: Program | PredicateTable, goals: list[Term],
             cfg: TeamConfig | None = None) -> tuple[list[Solution], RunStats]:
    """Solve `goals` with a team of workers; returns solutions and statistics."""
    cfg = cfg or TeamConfig()
    program = _as_program(program)
    names = query_names(program, goals)  # also interns the query's symbols before any fork
    n = cfg.workers
    if cfg.backend == "process":
        ctx = mp.get_context("fork")
        lock_factory, sem_factory = ctx.Lock, ctx.Semaphore
        sols_q = ctx.Queue(cfg.queue_size)
        results = ctx.SimpleQueue()
    else:
        lock_factory, sem_factory = threading.Lock, threading.Semaphore
        sols_q = queue_mod.Queue(cfg.queue_size)
        results = queue_mod.Queue()
    spin = cfg.sched.wait == "spin"
    memories = [WorkerMemory(w, cfg.caps) for w in range(n)]
    counts = [len(p) if p else 0 for p in program.preds]
    frames = OrFrameTable(n, cfg.frames, lock_factory, spin, clause_counts=counts)
    board = Board(n, lock_factory, sem_factory, cfg.sched.wait, cfg.sched.idle_sleep)
    workers = [
        Worker(program, memories, w, frames, board, cfg.sched, cfg.copy, sols_q.put,
               1 if cfg.mode == "first" else cfg.batch, cfg.debug, cfg.seed)
        for w in range(n)
    ]
    for w in workers:
        w.first = cfg.mode == "first"
    # worker 0 holds the whole tree until it shares; nobody may see an idle team before it starts
    board.set(0, S_STATE, BUSY_STATE)
    solutions: list[Solution] = []
    t0 = time.perf_counter()
    if cfg.backend == "process":
        contexts = [ctx.Process(target=_worker_entry, args=(w, goals, results), daemon=True)
                    for w in workers]
    else:
        contexts = [threading.Thread(target=_worker_entry, args=(w, goals, results), daemon=True)
                    for w in workers]
    for c in contexts:
        c.start()
    collector = threading.Thread(target=collect, args=(sols_q, n, program, names, solutions),
                                 name="thor-collector", daemon=True)
    collector.start()
    reports = [results.get() for _ in range(n)]
    collector.join()
    wall = time.perf_counter() - t0
    for c in contexts:
        c.join()
    errors = [r for r in reports if r[0] == "error"]
    if errors:
        raise TeamError(errors[0][2])
    stats = sorted((r[2] for r in reports), key=lambda s: s.worker)
    return solutions, RunStats(wall, stats, cfg.mode, cfg.copy, frames.live())
