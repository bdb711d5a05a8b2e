"""Benchmark harness: repeated sequential and team runs, tables and CSV.

Every cell of the table is an average over the repeats of one
(benchmark, workers) pair.  The CSV keeps one row per run, including the
sequential baseline runs (``workers`` 0, ``copy`` ``sequential``), so every
figure in the table can be recomputed from it.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .engine import Program
from .reader import consult_file, parse_goal
from .runtime import RunStats, TeamConfig, run_sequential, run_team

CSV_FIELDS = ("benchmark", "workers", "run", "mode", "copy", "time_s", "solutions",
              "sharing_ops", "cells_copied", "idle_ms")
BASELINE_COPY = "sequential"


@dataclass(frozen=True)
class Benchmark:
    name: str
    path: Path
    goal: str
    reduced: str

    def goal_text(self, reduced: bool = False) -> str:
        return self.reduced if reduced else self.goal


def programs_dir() -> Path:
    return Path(str(resources.files("thor") / "programs"))


def load_manifest(directory: Path | None = None) -> dict[str, Benchmark]:
    directory = directory or programs_dir()
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        raw = json.load(fh)
    return {name: Benchmark(name, directory / e["file"], e["goal"], e["reduced"])
            for name, e in raw.items()}


def select_benchmarks(names: list[str] | None, manifest: dict[str, Benchmark] | None = None
                      ) -> list[Benchmark]:
    manifest = manifest or load_manifest()
    if not names:
        return list(manifest.values())
    unknown = [n for n in names if n not in manifest]
    if unknown:
        raise KeyError(f"unknown benchmark {', '.join(unknown)}; "
                       f"known: {', '.join(manifest)}")
    return [manifest[n] for n in names]


@dataclass
class Row:
    benchmark: str
    workers: int
    run: int
    mode: str
    copy: str
    time_s: float
    solutions: int
    sharing_ops: int
    cells_copied: int
    idle_ms: float

    @classmethod
    def of(cls, bench: str, workers: int, run: int, stats: RunStats, copy: str) -> "Row":
        return cls(bench, workers, run, stats.mode, copy, stats.wall_time, stats.solutions,
                   stats.sharing_ops, stats.cells_copied, stats.idle_ms)

    @property
    def baseline(self) -> bool:
        return self.workers == 0


def run_benchmark(bench: Benchmark, workers: list[int], repeat: int, cfg: TeamConfig,
                  reduced: bool = False, progress=None) -> list[Row]:
    """Baseline runs first, then `repeat` team runs per worker count."""
    program = Program(consult_file(bench.path))
    goals = parse_goal(bench.goal_text(reduced))
    rows: list[Row] = []
    for r in range(repeat):
        _, st = run_sequential(program, goals, cfg.mode, cfg.caps)
        rows.append(Row.of(bench.name, 0, r, st, BASELINE_COPY))
        if progress:
            progress(rows[-1])
    for n in workers:
        team = TeamConfig(workers=n, mode=cfg.mode, copy=cfg.copy, sched=cfg.sched, caps=cfg.caps,
                          seed=cfg.seed, backend=cfg.backend)
        for r in range(repeat):
            _, st = run_team(program, goals, team)
            rows.append(Row.of(bench.name, n, r, st, cfg.copy))
            if progress:
                progress(rows[-1])
    return rows


# ---- summaries -------------------------------------------------------------------
@dataclass
class Cell:
    benchmark: str
    workers: int
    runs: int
    time_s: float
    solutions: float
    sharing_ops: float
    cells_copied: float
    idle_ms: float
    overhead: float | None = None
    speedup: float | None = None
    speedup_team1: float | None = None


def _avg(rows: list[Row], name: str) -> float:
    return sum(getattr(r, name) for r in rows) / len(rows)


def summarize(rows: list[Row]) -> list[Cell]:
    """Per (benchmark, workers) averages with overhead and speedups."""
    groups: dict[tuple[str, int], list[Row]] = {}
    for r in rows:
        groups.setdefault((r.benchmark, r.workers), []).append(r)
    cells = []
    for (bench, n), rs in groups.items():
        cells.append(Cell(bench, n, len(rs), _avg(rs, "time_s"), _avg(rs, "solutions"),
                          _avg(rs, "sharing_ops"), _avg(rs, "cells_copied"), _avg(rs, "idle_ms")))
    by_key = {(c.benchmark, c.workers): c for c in cells}
    for c in cells:
        base = by_key.get((c.benchmark, 0))
        one = by_key.get((c.benchmark, 1))
        if c.workers and base is not None:
            c.speedup = base.time_s / c.time_s
            if c.workers == 1:
                c.overhead = c.time_s / base.time_s
        if c.workers and one is not None:
            c.speedup_team1 = one.time_s / c.time_s
    return cells


def _fmt(x: float | None, spec: str) -> str:
    return "-" if x is None else format(x, spec)


def format_table(cells: list[Cell]) -> str:
    head = ("benchmark", "workers", "runs", "time_s", "overhead", "speedup", "vs_team1",
            "solutions", "sharing_ops", "cells_copied", "idle_ms")
    body = []
    for c in cells:
        body.append((c.benchmark, "seq" if c.workers == 0 else str(c.workers), str(c.runs),
                     f"{c.time_s:.3f}", _fmt(c.overhead, ".2f"), _fmt(c.speedup, ".2f"),
                     _fmt(c.speedup_team1, ".2f"), f"{c.solutions:g}", f"{c.sharing_ops:.1f}",
                     f"{c.cells_copied:.0f}", f"{c.idle_ms:.1f}"))
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h)
              for i, h in enumerate(head)]
    lines = ["  ".join(h.rjust(w) if i else h.ljust(w) for i, (h, w) in enumerate(zip(head, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(v.rjust(w) if i else v.ljust(w)
                               for i, (v, w) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def write_csv(path, rows: list[Row]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(CSV_FIELDS)
        for r in rows:
            out.writerow((r.benchmark, r.workers, r.run, r.mode, r.copy, f"{r.time_s:.6f}",
                          r.solutions, r.sharing_ops, r.cells_copied, f"{r.idle_ms:.3f}"))


def read_csv(path) -> list[Row]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [Row(d["benchmark"], int(d["workers"]), int(d["run"]), d["mode"], d["copy"],
                    float(d["time_s"]), int(d["solutions"]), int(d["sharing_ops"]),
                    int(d["cells_copied"]), float(d["idle_ms"]))
                for d in csv.DictReader(fh)]
