from __future__ import annotations

import random
from types import SimpleNamespace

import numpy as np
import pytest
from conftest import goal, program
from hypothesis import given, settings
from hypothesis import strategies as st
from share_harness import run_episode

from thor.copying import (
    RegisterSnapshot,
    adjust_stacks,
    compute_deltas,
    copy_stacks,
    copy_trailed_entries,
    dangling_addresses,
    full_copy_cells,
    relocation_mismatches,
)
from thor.memory import (
    ATOM,
    CP_GOAL,
    CP_H,
    CP_SIZE,
    CP_TR,
    INT,
    REF,
    STR,
    Capacities,
    StackOverflow,
    WorkerMemory,
    cell,
)
from thor.orframes import ROOT

CAPS = Capacities(heap=4096, cps=512, trail=512)


def _fill(mem: WorkerMemory, rng: random.Random, H: int, B: int, TR: int) -> None:
    """Plausible live stacks: heap cells pointing inside the heap, sane records."""
    heap, cps, trail = mem.views()
    for i in range(H):
        kind = rng.choice((REF, STR, ATOM, INT))
        if kind in (REF, STR):
            heap[i] = cell(kind, mem.hb + rng.randrange(H))
        else:
            heap[i] = cell(kind, rng.randrange(-50, 50))
    for r in range(0, B, CP_SIZE):
        cps[r:r + CP_SIZE] = [rng.randrange(3), 0, 0, mem.hb + rng.randrange(H + 1),
                              mem.tb + rng.randrange(TR + 1), mem.hb + rng.randrange(H),
                              mem.hb + rng.randrange(H), 0]
    for i in range(TR):
        trail[i] = mem.hb + rng.randrange(H)


def _machine(mem: WorkerMemory, H: int, B: int, TR: int):
    return SimpleNamespace(mem=mem, hb=mem.hb, tb=mem.tb, H=H, B=B, TR=TR)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 500), st.integers(0, 20), st.integers(0, 100),
       st.integers(1, 7), st.integers(0, 6))
def test_full_copy_relocates_every_address(seed, H, nrec, TR, qw, pw):
    if qw == pw:
        qw = (qw + 1) % 8
    rng = random.Random(seed)
    pm, qm = WorkerMemory(pw, CAPS), WorkerMemory(qw, CAPS)
    B = nrec * CP_SIZE
    _fill(pm, rng, H, B, TR)
    snap = RegisterSnapshot(pw, H, B, TR, 0, ROOT, -1)
    d = compute_deltas(pm, snap, qm, ROOT, None)
    assert d.full and d.ranges == ((0, H), (0, B), (0, TR))
    copied = copy_stacks(pm, qm, d)
    visits = adjust_stacks(qm, d)
    assert copied == visits == full_copy_cells(snap) == d.cells
    assert relocation_mismatches(pm, qm, H, B, TR) == 0
    assert dangling_addresses(_machine(qm, H, B, TR)) == 0
    assert dangling_addresses(_machine(pm, H, B, TR)) == 0


def test_incremental_ranges_start_at_the_common_node():
    rng = random.Random(3)
    pm, qm = WorkerMemory(0, CAPS), WorkerMemory(1, CAPS)
    _fill(pm, rng, 300, 5 * CP_SIZE, 40)
    node = 2 * CP_SIZE
    pm.cps[node + CP_H] = pm.hb + 120
    pm.cps[node + CP_TR] = pm.tb + 15
    snap = RegisterSnapshot(0, 300, 5 * CP_SIZE, 40, 0, 7, 4 * CP_SIZE)
    d = compute_deltas(pm, snap, qm, 7, node)
    assert not d.full
    assert d.ranges == ((120, 300), (node + CP_SIZE, 5 * CP_SIZE), (15, 40))
    assert (d.common_h, d.common_tr) == (120, 15)
    assert d.cells < full_copy_cells(snap)
    full = compute_deltas(pm, snap, qm, 7, node, full=True)
    assert full.full and full.cells == full_copy_cells(snap)


def test_receiver_too_small():
    pm = WorkerMemory(0, CAPS)
    qm = WorkerMemory(1, Capacities(heap=100, cps=512, trail=512))
    with pytest.raises(StackOverflow):
        compute_deltas(pm, RegisterSnapshot(0, 200, 0, 0, 0, ROOT, -1), qm, ROOT, None)


def test_trailed_entries_below_the_common_node_are_installed_relocated():
    pm, qm = WorkerMemory(0, CAPS), WorkerMemory(1, CAPS)
    ph, pc, pt = pm.views()
    qh, _, _ = qm.views()
    # cells 0..9 are older than the common node, 10.. are inside the increment
    for i in range(20):
        ph[i] = cell(REF, pm.hb + i)
    qh[:20] = [cell(REF, qm.hb + i) for i in range(20)]
    ph[3] = cell(STR, pm.hb + 12)      # binding to a newer structure
    ph[5] = cell(INT, 9)
    ph[14] = cell(ATOM, 2)             # inside the increment, copied anyway
    pt[:3] = [pm.hb + 3, pm.hb + 5, pm.hb + 14]
    pc[CP_H] = pm.hb + 10
    pc[CP_TR] = pm.tb + 0
    snap = RegisterSnapshot(0, 20, 2 * CP_SIZE, 3, 0, 4, 0)
    d = compute_deltas(pm, snap, qm, 4, 0)
    copy_stacks(pm, qm, d)
    assert copy_trailed_entries(pm, qm, d) == 2
    adjust_stacks(qm, d)
    assert qh[3] == cell(STR, qm.hb + 12)
    assert qh[5] == cell(INT, 9)
    assert qh[14] == cell(ATOM, 2)
    assert qh[4] == cell(REF, qm.hb + 4)


def test_audits_notice_corruption():
    rng = random.Random(5)
    pm, qm = WorkerMemory(0, CAPS), WorkerMemory(1, CAPS)
    _fill(pm, rng, 100, 3 * CP_SIZE, 10)
    snap = RegisterSnapshot(0, 100, 3 * CP_SIZE, 10, 0, ROOT, -1)
    d = compute_deltas(pm, snap, qm, ROOT, None)
    copy_stacks(pm, qm, d)
    # skip the adjustment: every address still points into p's stacks
    assert dangling_addresses(_machine(qm, 100, 3 * CP_SIZE, 10)) > 0
    assert relocation_mismatches(pm, qm, 100, 3 * CP_SIZE, 10) > 0
    adjust_stacks(qm, d)
    assert relocation_mismatches(pm, qm, 100, 3 * CP_SIZE, 10) == 0
    qm.views()[1][CP_GOAL] += 1
    assert relocation_mismatches(pm, qm, 100, 3 * CP_SIZE, 10) == 1


def test_adjust_is_one_vectorised_pass():
    qm = WorkerMemory(1, CAPS)
    heap = qm.views()[0]
    heap[:4] = np.array([cell(REF, 5), cell(INT, 5), cell(STR, 6), cell(ATOM, 1)])
    d = SimpleNamespace(ranges=((0, 4), (0, 0), (0, 0)), deltas=(100, 0, 0), stats={})
    assert adjust_stacks(qm, d) == 4
    assert list(heap[:4]) == [cell(REF, 105), cell(INT, 5), cell(STR, 106), cell(ATOM, 1)]


# ---- real shares between two workers ----------------------------------------------
CASES = [("queens", "queens(7,Q)"), ("map", "map(L)"), ("ham", "ham(cube,C)"),
         ("puzzle", "magic(S)")]


@settings(max_examples=16, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(CASES), st.sampled_from(["incremental", "full"]),
       st.integers(2, 40), st.integers(0, 3))
def test_shares_are_sound_and_complete(seed, case, copy, gap, climb):
    name, text = case
    ep = run_episode(program(name), goal(text), random.Random(seed), copy, gap, climb)
    plain_sols = _sequential(name, text)
    assert ep.solutions == plain_sols[0]
    assert ep.alternatives == plain_sols[1]
    assert ep.frames_live == 0
    for e in ep.events:
        assert e.mismatches == 0 and e.dangling == 0
        assert e.visits == e.copied
        if copy == "full":
            assert e.copied == e.full_equivalent and e.installs == 0
        else:
            assert e.copied <= e.full_equivalent


_SEQ: dict = {}


def _sequential(name: str, text: str) -> tuple[int, int]:
    if (name, text) not in _SEQ:
        from thor.engine import Machine

        m = Machine(program(name))
        m.solve(goal(text))
        _SEQ[name, text] = (m.solutions, m.alternatives)
    return _SEQ[name, text]
