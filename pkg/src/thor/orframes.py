"""The public part of the search tree.

Or-frames live in one shared table of unsigned 64-bit words so that
forked worker processes and worker threads see the same records.  Frame 0
is the root sentinel: it is never freed and every worker is a member.

Each frame is guarded by one of a fixed set of striped locks; allocation
goes through a global free list under its own lock.  Both kinds of lock
can busy-wait (``spin``) or block.
"""
from __future__ import annotations

import mmap
import os
import threading

import numpy as np

from .memory import CP_ALT, CP_LUB, CP_OR_FR, CP_PRED, CP_SIZE, GETWORK, MAX_WORKERS

ROOT = 0
NONE = -1

# frame record layout
F_PRED, F_NEXT, F_NALT, F_MEMBERS, F_NODE, F_PARENT, F_DEPTH, F_UID, F_INUSE, F_START = range(10)
F_SIZE = 10

# global words
G_FREE_TOP, G_UID, G_LIVE = range(3)

DEFAULT_FRAMES = 1 << 16
LOCK_STRIPES = 64


class FrameTableFull(RuntimeError):
    pass


class _Latch:
    """A lock that either spins on try-acquire or blocks."""

    __slots__ = ("lock", "spin")

    def __init__(self, lock, spin: bool):
        self.lock = lock
        self.spin = spin

    def __enter__(self):
        lock = self.lock
        if self.spin:
            while not lock.acquire(False):
                os.sched_yield()
        else:
            lock.acquire()
        return self

    def __exit__(self, *exc):
        self.lock.release()
        return False


def _words(n: int):
    buf = mmap.mmap(-1, max(n, 1) * 8)
    return buf, memoryview(buf).cast("Q")


class OrFrameTable:
    """Shared or-frame records with a synchronized alternative dispenser.

    `lock_factory` builds the underlying mutexes: ``threading.Lock`` for a
    thread team, a multiprocessing context's ``Lock`` for a process team.
    """

    def __init__(self, nworkers: int, capacity: int = DEFAULT_FRAMES, lock_factory=threading.Lock,
                 spin: bool = False, clause_counts=None):
        if not 1 <= nworkers <= MAX_WORKERS:
            raise ValueError(f"team size {nworkers} outside 1..{MAX_WORKERS}")
        self.nworkers = nworkers
        self.capacity = capacity
        self._buf, self.f = _words(capacity * F_SIZE)
        self._gbuf, self.g = _words(4)
        self._freebuf, self.free = _words(capacity)
        self.locks = [_Latch(lock_factory(), spin) for _ in range(LOCK_STRIPES)]
        self.alloc_lock = _Latch(lock_factory(), spin)
        self.clause_counts = clause_counts
        self.reset()

    def reset(self) -> None:
        f = self.f
        self._buf[:] = bytes(len(self._buf))
        all_members = (1 << self.nworkers) - 1
        f[F_MEMBERS] = all_members
        f[F_INUSE] = 1
        f[F_PARENT] = ROOT
        # pop order hands out low ids first
        n = self.capacity - 1
        np.frombuffer(self._freebuf, dtype=np.uint64)[:n] = np.arange(n, 0, -1, dtype=np.uint64)
        self.g[G_FREE_TOP] = n
        self.g[G_UID] = 1
        self.g[G_LIVE] = 0

    def lock(self, fid: int) -> _Latch:
        return self.locks[fid % LOCK_STRIPES]

    # ---- allocation ----------------------------------------------------
    def alloc(self, pred: int, next_alt: int, nalt: int, members: int, node: int, parent: int,
              log: list | None = None) -> int:
        with self.alloc_lock:
            top = self.g[G_FREE_TOP]
            if top == 0:
                raise FrameTableFull(f"more than {self.capacity - 1} live or-frames")
            top -= 1
            fid = self.free[top]
            self.g[G_FREE_TOP] = top
            uid = self.g[G_UID]
            self.g[G_UID] = uid + 1
            self.g[G_LIVE] += 1
        o = fid * F_SIZE
        f = self.f
        f[o + F_PRED] = pred
        f[o + F_NEXT] = next_alt
        f[o + F_START] = next_alt
        f[o + F_NALT] = nalt
        f[o + F_MEMBERS] = members
        f[o + F_NODE] = node
        f[o + F_PARENT] = parent
        f[o + F_DEPTH] = f[parent * F_SIZE + F_DEPTH] + 1
        f[o + F_UID] = uid
        f[o + F_INUSE] = 1
        if log is not None:
            log.append(("new", uid, next_alt, nalt))
        return fid

    def _release(self, fid: int) -> None:
        self.f[fid * F_SIZE + F_INUSE] = 0
        with self.alloc_lock:
            top = self.g[G_FREE_TOP]
            self.free[top] = fid
            self.g[G_FREE_TOP] = top + 1
            self.g[G_LIVE] -= 1

    # ---- the alternative dispenser -------------------------------------
    def getwork(self, fid: int, w: int, log: list | None = None) -> int:
        """Next untried clause index of frame `fid`, or NONE when exhausted.

        With `log`, each dispatch is recorded as ("take", uid, index, w).
        """
        o = fid * F_SIZE
        f = self.f
        with self.locks[fid % LOCK_STRIPES]:
            nxt = f[o + F_NEXT]
            if nxt >= f[o + F_NALT]:
                return NONE
            f[o + F_NEXT] = nxt + 1
        if log is not None:
            log.append(("take", f[o + F_UID], nxt, w))
        return nxt

    def leave(self, fid: int, w: int) -> int:
        """Drop `w` from the members of `fid`; reclaims the frame when nobody is left.

        Returns the parent frame.
        """
        if fid == ROOT:
            return ROOT
        o = fid * F_SIZE
        f = self.f
        parent = f[o + F_PARENT]
        with self.locks[fid % LOCK_STRIPES]:
            members = f[o + F_MEMBERS] & ~(1 << w)
            f[o + F_MEMBERS] = members
        if not members:
            self._release(fid)
        return parent

    def add_member(self, fid: int, w: int) -> None:
        o = fid * F_SIZE
        with self.locks[fid % LOCK_STRIPES]:
            self.f[o + F_MEMBERS] |= 1 << w

    # ---- queries -----------------------------------------------------
    def members(self, fid: int) -> int:
        return self.f[fid * F_SIZE + F_MEMBERS]

    def is_member(self, fid: int, w: int) -> bool:
        return bool(self.f[fid * F_SIZE + F_MEMBERS] >> w & 1)

    def parent(self, fid: int) -> int:
        return self.f[fid * F_SIZE + F_PARENT]

    def depth(self, fid: int) -> int:
        return self.f[fid * F_SIZE + F_DEPTH]

    def uid(self, fid: int) -> int:
        return self.f[fid * F_SIZE + F_UID]

    def untried(self, fid: int) -> int:
        o = fid * F_SIZE
        return max(0, self.f[o + F_NALT] - self.f[o + F_NEXT])

    def in_use(self, fid: int) -> bool:
        return bool(self.f[fid * F_SIZE + F_INUSE])

    def live(self) -> int:
        """Allocated frames, not counting the root."""
        return self.g[G_LIVE]

    def live_frames(self) -> list[int]:
        return [fid for fid in range(1, self.capacity) if self.f[fid * F_SIZE + F_INUSE]]

    def chain(self, fid: int) -> list[int]:
        """`fid` and its ancestors, youngest first, ending at the root."""
        out = [fid]
        while fid != ROOT:
            fid = self.parent(fid)
            out.append(fid)
        return out

    # ---- choice-point locators -------------------------------------------
    def node_offset_set(self, fid: int, m, addr: int) -> None:
        """Record the choice point at absolute address `addr` of machine `m`."""
        self.f[fid * F_SIZE + F_NODE] = addr - m.bb

    def node_offset_get(self, fid: int, m) -> int:
        """Absolute address of this frame's choice point in machine `m`."""
        return m.bb + self.f[fid * F_SIZE + F_NODE]

    def node(self, fid: int) -> int:
        return self.f[fid * F_SIZE + F_NODE]


def youngest_common_frame(table: OrFrameTable, p: int, q_frame: int) -> int:
    """First frame on the chain from `q_frame` upward that has `p` as a member."""
    fid = q_frame
    while fid != ROOT:
        if table.is_member(fid, p):
            return fid
        fid = table.parent(fid)
    return ROOT


def share_private_nodes(table: OrFrameTable, m, q: int, common: int = ROOT,
                        log: list | None = None) -> int:
    """Make every private choice point of machine `m` public, oldest first.

    `q` joins the new frames and every older public frame of `m` below
    `common`.  Returns the youngest frame of `m` afterwards.
    """
    cps = m.cps
    p = m.worker
    fid = m.pub_frame
    while fid != common and fid != ROOT:
        table.add_member(fid, q)
        fid = table.parent(fid)
    parent = m.pub_frame
    both = (1 << p) | (1 << q)
    counts = table.clause_counts
    b = m.pub_b + CP_SIZE if m.pub_b >= 0 else 0
    while b < m.B:
        pred = cps[b + CP_PRED]
        f = table.alloc(pred, cps[b + CP_ALT], counts[pred], both, b, parent, log)
        cps[b + CP_ALT] = GETWORK
        cps[b + CP_OR_FR] = f
        cps[b + CP_LUB] = 0
        parent = f
        b += CP_SIZE
    m.pub_b = m.B - CP_SIZE
    m.pub_frame = parent
    m.load = 0
    return parent
