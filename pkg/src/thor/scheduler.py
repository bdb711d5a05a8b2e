"""Work sharing between workers.

The team board is one shared array of signed 64-bit words with a row per
worker (signal slot, busy flag, load, published position, and the register
snapshot a giver leaves for its receiver) plus a few global words.

A request goes into the giver's inbound slot::

    READY --(requester q, under the slot lock)--> REQUEST(q)
    REQUEST(q) --(giver p)--> SHARED(q) --(receiver q)--> READY
    REQUEST(q) --(giver p, refusal)--> READY

The giver answers only at its poll points (choice-point creation and
getwork), so its stacks are in a consistent state whenever it shares.
"""
from __future__ import annotations

import mmap
import os
import threading
import time
from dataclasses import dataclass

from . import copying
from .orframes import ROOT, share_private_nodes

# slot encoding: kind | worker << 4
READY, REQUEST, SHARED = 0, 1, 2
KIND_MASK = 15

# per-worker row
(S_SLOT, S_STATE, S_LOAD, S_POS, S_H, S_B, S_TR, S_CONT, S_PUBF, S_PUBB, S_COMMON) = range(11)
ROW = 16
IDLE_STATE, BUSY_STATE = 0, 1

# global words
G_DONE, G_STOP, G_EPOCH, G_ERROR = range(4)
GLOBALS = 8

MOVE_STRATEGIES = ("nearest", "all-below")
WAIT_POLICIES = ("spin", "block")
VICTIM_CHOICES = ("lowest", "random")


@dataclass
class SchedulerConfig:
    delta: int = 1
    move: str = "nearest"
    wait: str = "block"
    poll_period: int = 1
    victim: str = "lowest"
    # longest sleep of a blocked idle worker between board scans, seconds
    idle_sleep: float = 0.002

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValueError("load threshold delta must be at least 1")
        if self.move not in MOVE_STRATEGIES:
            raise ValueError(f"unknown idle-move strategy {self.move!r}")
        if self.wait not in WAIT_POLICIES:
            raise ValueError(f"unknown wait policy {self.wait!r}")
        if self.victim not in VICTIM_CHOICES:
            raise ValueError(f"unknown victim choice {self.victim!r}")
        if self.poll_period < 1:
            raise ValueError("poll period must be at least 1")


class Board:
    """Signal slots, load counters, busy flags and termination words of a team."""

    def __init__(self, nworkers: int, lock_factory=threading.Lock, sem_factory=threading.Semaphore,
                 wait: str = "block", idle_sleep: float = 0.002):
        self.n = nworkers
        self._buf = mmap.mmap(-1, (nworkers * ROW + GLOBALS) * 8)
        words = memoryview(self._buf).cast("q")
        self.w = words
        self.gbase = nworkers * ROW
        self.slot_locks = [lock_factory() for _ in range(nworkers)]
        self.epoch_lock = lock_factory()
        self.sems = [sem_factory(0) for _ in range(nworkers)]
        self.spin = wait == "spin"
        self.idle_sleep = idle_sleep

    # ---- words -----------------------------------------------------------
    def get(self, w: int, field: int) -> int:
        return self.w[w * ROW + field]

    def set(self, w: int, field: int, value: int) -> None:
        self.w[w * ROW + field] = value

    def gget(self, field: int) -> int:
        return self.w[self.gbase + field]

    def gset(self, field: int, value: int) -> None:
        self.w[self.gbase + field] = value

    def bump_epoch(self) -> None:
        with self.epoch_lock:
            self.w[self.gbase + G_EPOCH] += 1

    def finished(self) -> bool:
        g = self.gbase
        return bool(self.w[g + G_DONE] or self.w[g + G_STOP])

    # ---- slots -----------------------------------------------------------
    def slot(self, p: int) -> int:
        return self.w[p * ROW + S_SLOT]

    def cas_slot(self, p: int, old: int, new: int) -> bool:
        lock = self.slot_locks[p]
        with lock:
            i = p * ROW + S_SLOT
            if self.w[i] != old:
                return False
            self.w[i] = new
            return True

    # ---- parking -----------------------------------------------------------
    def wake(self, w: int) -> None:
        self.sems[w].release()

    def wake_all(self) -> None:
        for s in self.sems:
            s.release()

    def pause(self, w: int, timeout: float | None = None) -> None:
        """Give way once: yield the processor (spin) or park until woken (block)."""
        if self.spin:
            os.sched_yield()
        else:
            self.sems[w].acquire(timeout=self.idle_sleep if timeout is None else timeout)

    def wait_until(self, w: int, cond) -> bool:
        """Wait until `cond()` holds; False if the team finished first."""
        while not cond():
            if self.finished():
                return cond()
            self.pause(w)
        return True


def request(kind: int, w: int) -> int:
    return kind | (w << 4)


# ---- giver side --------------------------------------------------------------
def poll_requests(p) -> None:
    """Answer a pending request in the inbound slot of worker `p`."""
    board = p.board
    s = board.slot(p.worker)
    if s & KIND_MASK != REQUEST:
        return
    q = s >> 4
    common = board.get(q, S_POS)
    if p.load >= p.sched.delta and (common == ROOT or p.frames.is_member(common, p.worker)):
        p_share(p, q, common)
    else:
        board.set(p.worker, S_SLOT, READY)
        p.stats.refused += 1
        board.wake(q)


def p_share(p, q: int, common: int) -> None:
    """Give all private work of `p` to idle worker `q` positioned at `common`."""
    board = p.board
    me = p.worker
    share_private_nodes(p.frames, p, q, common, p.dispatch_log)
    row = me * ROW
    w = board.w
    w[row + S_H] = p.H
    w[row + S_B] = p.B
    w[row + S_TR] = p.TR
    w[row + S_CONT] = p.cont
    w[row + S_PUBF] = p.pub_frame
    w[row + S_PUBB] = p.pub_b
    w[row + S_COMMON] = common
    w[row + S_LOAD] = 0
    # q counts as busy from here on so termination cannot slip in between
    board.set(q, S_POS, p.pub_frame)
    board.set(q, S_STATE, BUSY_STATE)
    board.bump_epoch()
    shared = request(SHARED, q)
    board.set(me, S_SLOT, shared)
    board.wake(q)
    p.stats.shares_given += 1
    # not "until READY": another requester may claim the slot as soon as q frees it
    while board.slot(me) == shared:
        board.pause(me)


# ---- receiver side ------------------------------------------------------------
def q_share(q, p: int) -> None:
    """Copy the work published by giver `p` into `q` and release `p`."""
    board = q.board
    w = board.w
    row = p * ROW
    snap = copying.RegisterSnapshot(p, w[row + S_H], w[row + S_B], w[row + S_TR], w[row + S_CONT],
                                    w[row + S_PUBF], w[row + S_PUBB])
    common = w[row + S_COMMON]
    pm, qm = q.memories[p], q.mem
    node = q.frames.node(common) if common != ROOT else None
    full = q.copy_mode == "full"
    try:
        d = copying.compute_deltas(pm, snap, qm, common, node, full=full)
        copied = copying.copy_stacks(pm, qm, d)
        installs = 0 if full else copying.copy_trailed_entries(pm, qm, d)
    finally:
        board.set(p, S_SLOT, READY)
        board.wake(p)
    visits = copying.adjust_stacks(qm, d)
    q.H, q.B, q.TR, q.cont = snap.H, snap.B, snap.TR, snap.cont
    q.pub_frame, q.pub_b = snap.pub_frame, snap.pub_b
    q.load = 0
    q.failing = True  # resume by backtracking into getwork at the youngest public node
    st = q.stats
    st.shares_received += 1
    if full:
        st.cells_copied_full += copied
    else:
        st.cells_copied_incremental += copied
    st.installs += installs
    st.adjust_visits += visits
    if q.share_log is not None:
        q.share_log.append({
            "giver": p, "receiver": q.worker, "common": common, "full": full,
            "copied": copied, "visits": visits, "installs": installs,
            "full_equivalent": copying.full_copy_cells(snap),
        })


# ---- idle search ------------------------------------------------------------------
def busy_workers(board: Board, me: int) -> list[int]:
    return [w for w in range(board.n) if w != me and board.get(w, S_STATE) == BUSY_STATE]


def search_for_work(q) -> tuple[list[int], list[int]]:
    """Candidate givers (load above the threshold) below and above q's position."""
    board, frames = q.board, q.frames
    here = q.pub_frame
    below, above = [], []
    for p in busy_workers(board, q.worker):
        if board.get(p, S_LOAD) < q.sched.delta:
            continue
        if here == ROOT or frames.is_member(here, p):
            below.append(p)
        else:
            above.append(p)
    if q.sched.victim == "random":
        q.rng.shuffle(below)
        q.rng.shuffle(above)
    return below, above


def ancestor_has_work(q) -> bool:
    frames = q.frames
    f = q.pub_frame
    while f != ROOT:
        f = frames.parent(f)
        if f != ROOT and frames.untried(f) > 0:
            return True
    return False


def should_move(q) -> bool:
    """Idle-move strategy: whether q leaves its current frame for the parent."""
    here = q.pub_frame
    if here == ROOT:
        return False
    busy = busy_workers(q.board, q.worker)
    if not busy or ancestor_has_work(q):
        return True
    members = q.frames.members(here)
    if q.sched.move == "nearest":
        return not any(members >> w & 1 for w in busy)
    return not all(members >> w & 1 for w in busy)


def ask(q, p: int) -> bool:
    """Send a request to `p` and wait for the answer; True when work arrived."""
    board = q.board
    me = q.worker
    mine = request(REQUEST, me)
    if not board.cas_slot(p, READY, mine):
        return False
    q.stats.requests += 1
    while True:
        s = board.slot(p)
        if s != mine:
            break
        if board.finished():
            # withdraw unless the giver already took the request
            if board.cas_slot(p, mine, READY):
                return False
            continue
        refuse_all(q)
        board.pause(me)
    if s == request(SHARED, me):
        q_share(q, p)
        return True
    return False


def refuse_all(w) -> None:
    """An idle worker turns down any request addressed to it."""
    board = w.board
    s = board.slot(w.worker)
    if s & KIND_MASK == REQUEST:
        board.set(w.worker, S_SLOT, READY)
        board.wake(s >> 4)


def detect_termination(board: Board) -> bool:
    """All workers idle at the root, confirmed by an unchanged epoch."""
    if board.gget(G_STOP):
        return True
    e1 = board.gget(G_EPOCH)
    for w in range(board.n):
        if board.get(w, S_STATE) != IDLE_STATE or board.get(w, S_POS) != ROOT:
            return False
    return board.gget(G_EPOCH) == e1


def idle_loop(q):
    """Look for work until some arrives (returns True) or the team is done (False)."""
    board = q.board
    me = q.worker
    t0 = time.perf_counter()
    sleep = board.idle_sleep / 8
    try:
        while True:
            if board.finished():
                return False
            refuse_all(q)
            # untried alternatives on the own branch mean q is not idle yet
            if q.pub_frame != ROOT and ancestor_has_work(q):
                if q.move_up():
                    return True
                continue
            below, above = search_for_work(q)
            for p in below:
                if ask(q, p):
                    return True
            if q.pub_frame != ROOT and (above or should_move(q)):
                if q.move_up():
                    return True
                continue
            if q.pub_frame == ROOT and detect_termination(board):
                board.gset(G_DONE, 1)
                board.wake_all()
                return False
            board.pause(me, sleep)
            sleep = min(sleep * 2, board.idle_sleep)
    finally:
        q.stats.idle_time += time.perf_counter() - t0

