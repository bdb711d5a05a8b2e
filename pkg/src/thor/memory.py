"""Cell encoding, the address scheme and per-worker stack storage.

A cell is one signed 64-bit word: ``payload << 3 | tag``.  REF, STR and
CONT payloads are absolute addresses, which is what makes moving a stack
segment between workers a relocation problem rather than a plain copy.

An address is ``base(worker, stack) + offset``.  Every (worker, stack) pair
owns a disjoint 2**32-cell window, so the owner of any address can be
decoded from the address alone.

Stacks live in anonymous shared mappings.  They are created by the parent
before workers start; forked worker processes and worker threads both see
the same pages, so a receiving worker can read a giver's stacks directly.
"""
from __future__ import annotations

import mmap
from dataclasses import dataclass

import numpy as np

REF, STR, CONT, ATOM, INT, FUN, DONE = range(7)
TAG_BITS = 3
TAG_MASK = 7
TAG_NAMES = ("REF", "STR", "CONT", "ATOM", "INT", "FUN", "DONE")

HEAP, CPS, TRAIL = 0, 1, 2
STACK_NAMES = ("heap", "cps", "trail")
WINDOW_BITS = 32
MAX_WORKERS = 64

# integers carried in a cell lose TAG_BITS of the word
INT_MIN = -(1 << (63 - TAG_BITS))
INT_MAX = (1 << (63 - TAG_BITS)) - 1

# choice-point record layout (one record = CP_SIZE cells on the cps stack)
CP_ALT, CP_OR_FR, CP_LUB, CP_H, CP_TR, CP_GOAL, CP_CONT, CP_PRED = range(8)
CP_SIZE = 8
CP_FIELD_NAMES = ("ALT", "OR_FR", "LUB", "H", "TR", "GOAL", "CONT", "PRED")
GETWORK = -1
# fields holding heap addresses / trail addresses
CP_HEAP_FIELDS = (CP_H, CP_GOAL, CP_CONT)
CP_TRAIL_FIELDS = (CP_TR,)

DEFAULT_HEAP = 8 * 1024 * 1024
DEFAULT_CPS = 1024 * 1024
DEFAULT_TRAIL = 1024 * 1024


class StackOverflow(RuntimeError):
    pass


def base(worker: int, stack: int) -> int:
    return ((worker * 4) + stack + 1) << WINDOW_BITS


def decode_address(addr: int) -> tuple[int, int, int]:
    """(worker, stack, offset) for an absolute address."""
    window = (addr >> WINDOW_BITS) - 1
    if window < 0:
        raise ValueError(f"address {addr:#x} is below every stack window")
    return window >> 2, window & 3, addr & ((1 << WINDOW_BITS) - 1)


def cell(tag: int, payload: int) -> int:
    return (payload << TAG_BITS) | tag


def tag_of(c: int) -> int:
    return c & TAG_MASK


def payload_of(c: int) -> int:
    return c >> TAG_BITS


def is_address_tag(tag: int) -> bool:
    return tag < ATOM


def describe(c: int) -> str:
    tag = c & TAG_MASK
    if tag < ATOM:
        w, s, off = decode_address(c >> TAG_BITS)
        return f"{TAG_NAMES[tag]}(w{w}.{STACK_NAMES[s]}+{off})"
    return f"{TAG_NAMES[tag]}({c >> TAG_BITS})"


def _segment(cells: int):
    buf = mmap.mmap(-1, max(cells, 1) * 8)
    return buf, memoryview(buf).cast("q")


@dataclass
class Capacities:
    heap: int = DEFAULT_HEAP
    cps: int = DEFAULT_CPS
    trail: int = DEFAULT_TRAIL

    def __post_init__(self) -> None:
        if self.cps % CP_SIZE:
            self.cps -= self.cps % CP_SIZE
        if min(self.heap, self.cps, self.trail) <= 0:
            raise ValueError("stack capacities must be positive")


class WorkerMemory:
    """The three stacks of one worker, addressable from any worker."""

    def __init__(self, worker: int, caps: Capacities | None = None):
        if not 0 <= worker < MAX_WORKERS:
            raise ValueError(f"worker id {worker} out of range")
        caps = caps or Capacities()
        self.worker = worker
        self.caps = caps
        self._heap_buf, self.heap = _segment(caps.heap)
        self._cps_buf, self.cps = _segment(caps.cps)
        self._trail_buf, self.trail = _segment(caps.trail)
        self.hb = base(worker, HEAP)
        self.bb = base(worker, CPS)
        self.tb = base(worker, TRAIL)
        self._np = None

    def views(self):
        """numpy views (heap, cps, trail) over the same memory."""
        if self._np is None:
            self._np = tuple(
                np.frombuffer(buf, dtype=np.int64)
                for buf in (self._heap_buf, self._cps_buf, self._trail_buf)
            )
        return self._np

    def stack(self, which: int):
        return (self.heap, self.cps, self.trail)[which]

    def base_of(self, which: int) -> int:
        return (self.hb, self.bb, self.tb)[which]

    def capacity(self, which: int) -> int:
        return (self.caps.heap, self.caps.cps, self.caps.trail)[which]

    def owns(self, addr: int) -> bool:
        return decode_address(addr)[0] == self.worker
