"""A team member: the sequential machine plus the parallel hooks."""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .engine import IDLE, STOP, Machine, Program
from .memory import CP_OR_FR, CP_SIZE, WorkerMemory
from .orframes import ROOT, OrFrameTable
from .scheduler import (
    BUSY_STATE,
    G_STOP,
    IDLE_STATE,
    ROW,
    S_LOAD,
    S_POS,
    S_SLOT,
    S_STATE,
    Board,
    SchedulerConfig,
    idle_loop,
    poll_requests,
)


class Stopped(Exception):
    """Raised at a poll point once the team has been told to stop."""


@dataclass
class WorkerStats:
    worker: int
    calls: int = 0
    alternatives: int = 0
    choicepoints: int = 0
    solutions: int = 0
    shares_given: int = 0
    shares_received: int = 0
    requests: int = 0
    refused: int = 0
    cells_copied_incremental: int = 0
    cells_copied_full: int = 0
    installs: int = 0
    adjust_visits: int = 0
    getwork_calls: int = 0
    idle_time: float = 0.0
    busy_time: float = 0.0
    dispatches: list = field(default_factory=list)
    share_events: list = field(default_factory=list)


class Worker(Machine):
    def __init__(self, program: Program, memories: list[WorkerMemory], me: int,
                 frames: OrFrameTable, board: Board, sched: SchedulerConfig,
                 copy_mode: str = "incremental", emit=None, batch: int = 256,
                 debug: bool = False, seed: int | None = None):
        super().__init__(program, memories[me])
        self.memories = memories
        self.frames = frames
        self.board = board
        self.sched = sched
        self.copy_mode = copy_mode
        self.emit = emit
        self.batch_size = batch
        self.batch: list = []
        self.stats = WorkerStats(me)
        self.share_log = [] if debug else None
        self.dispatch_log = [] if debug else None
        self.rng = random.Random(None if seed is None else seed * 1009 + me)
        self._row = me * ROW
        self._stop = board.gbase + G_STOP
        self._period = sched.poll_period
        self._countdown = sched.poll_period
        self.poll = self._poll

    # ---- hooks called by the machine -------------------------------------
    def _poll(self) -> None:
        self._countdown -= 1
        if self._countdown:
            return
        self._countdown = self._period
        w = self.board.w
        row = self._row
        w[row + S_LOAD] = self.load
        if w[row + S_SLOT]:
            poll_requests(self)
        if w[self._stop]:
            raise Stopped

    def getwork_at(self, b: int) -> int:
        self._countdown = 1
        self._poll()
        self.stats.getwork_calls += 1
        return self.frames.getwork(self.cps[b + CP_OR_FR], self.worker, self.dispatch_log)

    def solution_found(self) -> None:
        self.batch.append(self.encode_answer())
        if len(self.batch) >= self.batch_size or self.first:
            self.flush()

    def flush(self) -> None:
        if self.batch and self.emit is not None:
            self.emit((self.worker, self.batch))
        self.batch = []

    # ---- moving in the public tree ------------------------------------------
    def publish(self, state: int) -> None:
        b = self.board
        b.set(self.worker, S_POS, self.pub_frame)
        if state == IDLE_STATE:
            b.set(self.worker, S_LOAD, 0)
        b.set(self.worker, S_STATE, state)

    def move_up(self) -> bool:
        """Leave the current frame and try its parent.  True when work was found."""
        b = self.pub_b
        parent = self.frames.leave(self.pub_frame, self.worker)
        self.B = b
        self.pub_b = b - CP_SIZE
        self.pub_frame = parent
        self.board.set(self.worker, S_POS, parent)
        if self.backtrack() is not None:
            return False
        self.publish(BUSY_STATE)
        self.board.bump_epoch()
        return True

    def leave_all(self) -> None:
        """Drop out of every frame on the current branch (shutdown)."""
        f = self.pub_frame
        while f != ROOT:
            f = self.frames.leave(f, self.worker)
        self.pub_frame = ROOT

    # ---- lifecycle -------------------------------------------------------------
    def main(self, goals) -> WorkerStats:
        """Run until the team is done; worker 0 starts the query."""
        t0 = time.perf_counter()
        try:
            if self.worker == 0:
                self.load_query(goals)
                status = self.run()
            else:
                self.query_vars = {}
                self.reset()
                self.load_query_names(goals)
                status = IDLE
            while status != STOP:
                self.publish(IDLE_STATE)
                if not idle_loop(self):
                    break
                status = self.run()
            if status == STOP:
                self.board.gset(G_STOP, 1)
                self.board.wake_all()
        except Stopped:
            pass
        finally:
            self.flush()
            self.leave_all()
            self.publish(IDLE_STATE)
        st = self.stats
        st.calls, st.alternatives = self.calls, self.alternatives
        st.choicepoints, st.solutions = self.choicepoints, self.solutions
        st.busy_time = time.perf_counter() - t0 - st.idle_time
        if self.dispatch_log is not None:
            st.dispatches = self.dispatch_log
        if self.share_log is not None:
            st.share_events = self.share_log
        return st

    def load_query_names(self, goals) -> None:
        """Query variable addresses without building the query (idle start)."""
        tmpl = self.program.compile(None, goals, query=True)
        self.query_vars = {
            name: self.hb + pos for name, pos in tmpl.varpos.items() if not name.startswith("_")
        }
