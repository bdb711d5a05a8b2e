from __future__ import annotations

import pytest
from conftest import goal, multiset, program, program_text, pyval
from oracles import EUROPE, EUROPE_BORDERS, valid_colouring

from thor.engine import Machine
from thor.runtime import (
    RunStats,
    TeamConfig,
    TeamError,
    collect,
    run_sequential,
    run_team,
    stats_report,
)
from thor.scheduler import SchedulerConfig
from thor.worker import WorkerStats


@pytest.mark.parametrize("bad", [dict(workers=0), dict(workers=65), dict(mode="some"),
                                 dict(copy="lazy"), dict(backend="gpu")])
def test_team_config_validation(bad):
    with pytest.raises(ValueError):
        TeamConfig(**bad)


def test_sequential_matches_plain_machine():
    prog = program("queens")
    sols, st = run_sequential(prog, goal("queens(6,Q)"))
    m = Machine(prog)
    m.solve(goal("queens(6,Q)"))
    assert len(sols) == m.solutions == st.solutions == 4
    assert st.alternatives == m.alternatives
    assert [s.seq for s in sols] == [0, 1, 2, 3]


@pytest.mark.parametrize("backend", ["thread", "process"])
@pytest.mark.parametrize("workers", [1, 2, 4, 8])
@pytest.mark.parametrize("copy", ["incremental", "full"])
def test_team_answers_equal_sequential(backend, workers, copy):
    prog = program("queens")
    g = goal("queens(6,Q)")
    seq, sst = run_sequential(prog, g)
    cfg = TeamConfig(workers=workers, copy=copy, backend=backend, seed=workers,
                     sched=SchedulerConfig(victim="random"))
    sols, st = run_team(prog, g, cfg)
    assert multiset(sols, "Q") == multiset(seq, "Q")
    assert len(sols) == st.solutions
    assert st.alternatives == sst.alternatives
    assert st.frames_live == 0
    assert len(st.workers) == workers
    if workers == 1:
        assert st.sharing_ops == 0 and st.cells_copied == 0


def test_full_copy_moves_more_cells():
    prog = program("queens")
    g = goal("queens(8,Q)")
    inc = run_team(prog, g, TeamConfig(workers=2, backend="thread", seed=1))[1]
    full = run_team(prog, g, TeamConfig(workers=2, copy="full", backend="thread", seed=1))[1]
    assert inc.total("cells_copied_full") == 0 and full.total("cells_copied_incremental") == 0
    if inc.sharing_ops and full.sharing_ops:
        assert inc.cells_copied / inc.sharing_ops < full.cells_copied / full.sharing_ops


@pytest.mark.parametrize("workers", [1, 3])
def test_first_mode_stops_early(workers):
    sols, st = run_team(program("map"), goal("map(L)"), TeamConfig(workers=workers, mode="first"))
    assert 1 <= len(sols) <= workers
    for s in sols:
        assert valid_colouring(EUROPE, EUROPE_BORDERS, pyval(s.bindings["L"]))
    assert st.frames_live == 0


def test_no_answers():
    sols, st = run_team(program("queens"), goal("queens(3,Q)"), TeamConfig(workers=2))
    assert sols == [] and st.solutions == 0 and st.frames_live == 0


def test_worker_error_surfaces_as_team_error():
    prog = program_text("p(X) :- member(X, [1,2,3]), X > 2, Y is foo + X, Y > 0.\n"
                        "member(X,[X|_]). member(X,[_|T]) :- member(X,T).")
    with pytest.raises(TeamError, match="evaluable"):
        run_team(prog, goal("p(X)"), TeamConfig(workers=2))


def test_collector_numbers_answers_in_arrival_order():
    import queue

    src = queue.Queue()
    for item in [(1, [(1,), (2,)]), None, (0, [(3,)]), None]:
        src.put(item)
    out: list = []
    collect(src, 2, program("queens"), ["X"], out)
    assert [(s.worker, s.seq, s.key) for s in out] == [(1, 0, (1,)), (1, 1, (2,)), (0, 2, (3,))]


def _stats(t: float) -> RunStats:
    return RunStats(t, [WorkerStats(0)])


def test_speedup_of_identical_runs_is_one():
    r = stats_report([_stats(2.0)] * 3, [_stats(2.0)] * 3, [_stats(2.0)])
    assert r.speedup == pytest.approx(1.0) and r.overhead == pytest.approx(1.0)


def test_reported_timings_reproduce_ratios():
    # queens, one against two workers, and one worker against the sequential host system
    assert stats_report(_stats(13.2), _stats(24.1)).speedup == pytest.approx(1.83, abs=0.005)
    assert stats_report(_stats(48.10), _stats(48.10), _stats(51.63)).overhead == pytest.approx(
        1.07, abs=0.005)
