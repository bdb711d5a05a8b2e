"""Moving execution state from a giving worker to a receiving worker.

Every worker's stacks have the same layout from a fixed origin, so a cell
copied from offset k of the giver lands at offset k of the receiver and a
whole stack shifts by one constant: ``base(q, s) - base(p, s)``.  Heap
cells carry tagged addresses (REF/STR/CONT), trail entries are raw heap
addresses and choice points hold raw heap and trail addresses in fixed
fields; relocation adds the stack delta to each of them in one vectorised
pass over the copied segments.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .memory import (
    CP_CONT,
    CP_GOAL,
    CP_H,
    CP_SIZE,
    CP_TR,
    HEAP,
    CPS,
    TRAIL,
    StackOverflow,
    WorkerMemory,
)
from .orframes import ROOT

ADDRESS_TAG_LIMIT = 3  # REF, STR, CONT


@dataclass(frozen=True)
class RegisterSnapshot:
    """Giver registers at share time.  Tops are offsets from the stack origins."""

    worker: int
    H: int
    B: int
    TR: int
    cont: int
    pub_frame: int
    pub_b: int

    @classmethod
    def of(cls, m) -> "RegisterSnapshot":
        return cls(m.worker, m.H, m.B, m.TR, m.cont, m.pub_frame, m.pub_b)


@dataclass
class CopyDelta:
    giver: int
    receiver: int
    common: int
    full: bool
    # (lo, hi) cell offsets per stack: heap, cps, trail
    ranges: tuple
    # address shift per stack
    deltas: tuple
    # heap top of the common node; trail entries below it need installing
    common_h: int
    common_tr: int
    stats: dict = field(default_factory=dict)

    @property
    def cells(self) -> int:
        return sum(hi - lo for lo, hi in self.ranges)


def compute_deltas(pm: WorkerMemory, snap: RegisterSnapshot, qm: WorkerMemory, common: int,
                   node: int | None, full: bool = False) -> CopyDelta:
    """Ranges to copy from giver memory `pm` to receiver memory `qm`.

    `node` is the choice-point offset of the common frame (ignored at the
    root); the common node's saved tops bound the incremental ranges.
    """
    if full or common == ROOT:
        h0 = b0 = tr0 = 0
    else:
        cps = pm.cps
        h0 = cps[node + CP_H] - pm.hb
        tr0 = cps[node + CP_TR] - pm.tb
        b0 = node + CP_SIZE
    ranges = ((h0, snap.H), (b0, snap.B), (tr0, snap.TR))
    for (lo, hi), which in zip(ranges, (HEAP, CPS, TRAIL)):
        if hi > qm.capacity(which):
            raise StackOverflow(
                f"receiver {qm.worker} cannot hold {hi} cells of the giver's stack {which}")
        if lo > hi:
            raise ValueError(f"common node above the giver's top on stack {which}")
    deltas = tuple(qm.base_of(s) - pm.base_of(s) for s in (HEAP, CPS, TRAIL))
    return CopyDelta(pm.worker, qm.worker, common, full or common == ROOT, ranges, deltas,
                     0 if full else h0, 0 if full else tr0)


def copy_stacks(pm: WorkerMemory, qm: WorkerMemory, d: CopyDelta) -> int:
    """Raw copy of the delta ranges; returns the number of cells copied."""
    src, dst = pm.views(), qm.views()
    n = 0
    for s, (lo, hi) in enumerate(d.ranges):
        if hi > lo:
            dst[s][lo:hi] = src[s][lo:hi]
            n += hi - lo
    d.stats["copied"] = n
    return n


def copy_trailed_entries(pm: WorkerMemory, qm: WorkerMemory, d: CopyDelta) -> int:
    """Install the giver's bindings of cells older than the common node.

    The installed values are relocated here because they lie outside the
    ranges `adjust_stacks` visits.  Returns the number of installs.
    """
    lo, hi = d.ranges[TRAIL]
    if d.full or hi <= lo:
        d.stats["installed"] = 0
        return 0
    pheap = pm.views()[HEAP]
    qheap = qm.views()[HEAP]
    entries = pm.views()[TRAIL][lo:hi] - pm.hb
    offs = entries[entries < d.common_h]
    vals = pheap[offs]
    addr = (vals & 7) < ADDRESS_TAG_LIMIT
    vals[addr] += d.deltas[HEAP] << 3
    qheap[offs] = vals
    d.stats["installed"] = int(offs.size)
    return int(offs.size)


def adjust_stacks(qm: WorkerMemory, d: CopyDelta) -> int:
    """Relocate every address inside the copied ranges; returns cells visited."""
    heap, cps, trail = qm.views()
    dh, _, dt = d.deltas
    visits = 0
    lo, hi = d.ranges[HEAP]
    if hi > lo:
        seg = heap[lo:hi]
        seg[(seg & 7) < ADDRESS_TAG_LIMIT] += dh << 3
        visits += hi - lo
    lo, hi = d.ranges[CPS]
    if hi > lo:
        recs = cps[lo:hi].reshape(-1, CP_SIZE)
        recs[:, (CP_H, CP_GOAL, CP_CONT)] += dh
        recs[:, CP_TR] += dt
        visits += hi - lo
    lo, hi = d.ranges[TRAIL]
    if hi > lo:
        trail[lo:hi] += dh
        visits += hi - lo
    d.stats["visits"] = visits
    return visits


def full_copy_cells(snap: RegisterSnapshot) -> int:
    """Cells a full copy of the giver's live stacks would move."""
    return snap.H + snap.B + snap.TR


# ---- audits ---------------------------------------------------------------
def dangling_addresses(m) -> int:
    """Addresses in the live stacks of machine `m` that point outside them."""
    heap, cps, trail = m.mem.views()
    hb, tb = m.hb, m.tb
    H, B, TR = m.H, m.B, m.TR
    bad = 0
    live = heap[:H]
    tagged = live[(live & 7) < ADDRESS_TAG_LIMIT] >> 3
    bad += int(np.count_nonzero((tagged < hb) | (tagged >= hb + H)))
    entries = trail[:TR]
    bad += int(np.count_nonzero((entries < hb) | (entries >= hb + H)))
    if B:
        recs = cps[:B].reshape(-1, CP_SIZE)
        hs = recs[:, (CP_H, CP_GOAL, CP_CONT)]
        bad += int(np.count_nonzero((hs < hb) | (hs > hb + H)))
        trs = recs[:, CP_TR]
        bad += int(np.count_nonzero((trs < tb) | (trs > tb + TR)))
    return bad


def relocation_mismatches(pm: WorkerMemory, qm: WorkerMemory, H: int, B: int, TR: int) -> int:
    """Cells of q's live stacks that differ from p's after shifting p's addresses."""
    ph, pc, pt = pm.views()
    qh, qc, qt = qm.views()
    dh = qm.hb - pm.hb
    dt = qm.tb - pm.tb
    exp = ph[:H].copy()
    exp[(exp & 7) < ADDRESS_TAG_LIMIT] += dh << 3
    bad = int(np.count_nonzero(exp != qh[:H]))
    bad += int(np.count_nonzero(pt[:TR] + dh != qt[:TR]))
    if B:
        rec = pc[:B].reshape(-1, CP_SIZE).copy()
        rec[:, (CP_H, CP_GOAL, CP_CONT)] += dh
        rec[:, CP_TR] += dt
        bad += int(np.count_nonzero(rec != qc[:B].reshape(-1, CP_SIZE)))
    return bad
