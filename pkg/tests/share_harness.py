"""Deterministic two-worker sharing on one thread.

Worker p runs the query.  At random poll points the harness files a
request from the idle worker q; p answers it through the normal giver code
and, when p signals the share, the board runs q's receiving side inline.
Right after each copy the receiver's stacks are compared with the giver's
(which cannot change while p waits for the handshake), then q explores
what it received, optionally climbs a few frames, and goes idle again.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from thor import copying
from thor.memory import Capacities, WorkerMemory
from thor.orframes import ROOT, OrFrameTable
from thor.scheduler import (
    KIND_MASK,
    REQUEST,
    S_POS,
    S_SLOT,
    SHARED,
    Board,
    SchedulerConfig,
    q_share,
    request,
)
from thor.worker import Worker

CAPS = Capacities(heap=1 << 18, cps=1 << 16, trail=1 << 16)


@dataclass
class ShareEvent:
    copy: str
    common: int
    copied: int
    visits: int
    full_equivalent: int
    installs: int
    mismatches: int
    dangling: int


@dataclass
class Episode:
    events: list[ShareEvent] = field(default_factory=list)
    solutions: int = 0
    alternatives: int = 0
    dispatches: list = field(default_factory=list)
    frames_live: int = 0


class _SyncBoard(Board):
    def __init__(self):
        super().__init__(2)
        self.on_shared = None

    def wake(self, w: int) -> None:
        slot = self.slot(1 - w)
        if self.on_shared is not None and slot == request(SHARED, w):
            self.on_shared(1 - w, w)
        else:
            super().wake(w)


def run_episode(program, goals, rng: random.Random, copy: str = "incremental",
                mean_gap: int = 20, max_climb: int = 3) -> Episode:
    frames = OrFrameTable(2, 1 << 14, clause_counts=[len(c) if c else 0 for c in program.preds])
    board = _SyncBoard()
    mems = [WorkerMemory(w, CAPS) for w in range(2)]
    sched = SchedulerConfig(wait="block", idle_sleep=0.0)
    p, q = (Worker(program, mems, w, frames, board, sched, copy, None, 1 << 30, True, 0)
            for w in range(2))
    ep = Episode()
    state = {"gap": rng.randint(1, 2 * mean_gap), "inject": True}

    def receive(giver: int, receiver: int) -> None:
        before = len(q.share_log)
        q_share(q, giver)
        (log,) = q.share_log[before:]
        ep.events.append(ShareEvent(
            copy, log["common"], log["copied"], log["visits"], log["full_equivalent"],
            log["installs"],
            copying.relocation_mismatches(p.mem, q.mem, q.H, q.B, q.TR),
            copying.dangling_addresses(q)))
        explore(q)

    def explore(w: Worker) -> None:
        """Run `w` until idle, then maybe climb a few frames and run again."""
        w.run()
        for _ in range(rng.randint(0, max_climb)):
            if w.pub_frame == ROOT:
                break
            if w.move_up():
                w.run()

    board.on_shared = receive
    orig_poll = p.poll

    def poll() -> None:
        state["gap"] -= 1
        if state["inject"] and state["gap"] <= 0:
            state["gap"] = rng.randint(1, 2 * mean_gap)
            # q asks from a frame p still belongs to
            while q.pub_frame != ROOT and not frames.is_member(q.pub_frame, 0):
                if q.move_up():
                    q.run()
            if board.slot(0) & KIND_MASK != REQUEST:
                board.set(1, S_POS, q.pub_frame)
                board.set(0, S_SLOT, request(REQUEST, 1))
        orig_poll()

    p.poll = poll
    p.query_vars = {}
    q.reset()
    q.load_query_names(goals)
    p.load_query(goals)
    p.run()
    while p.pub_frame != ROOT:
        if p.move_up():
            p.run()
    # drain what q still holds, with no further sharing
    state["inject"] = False
    while q.pub_frame != ROOT:
        if q.move_up():
            q.run()
    for w in (p, q):
        w.leave_all()
        w.flush()
    ep.solutions = p.solutions + q.solutions
    ep.alternatives = p.alternatives + q.alternatives
    ep.dispatches = p.dispatch_log + q.dispatch_log
    ep.frames_live = frames.live()
    return ep
