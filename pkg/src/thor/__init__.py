"""A miniature or-parallel Prolog engine.

Pure Horn-clause programs run on a sequential abstract machine or on a
team of workers that share open alternatives through or-frames and copy
each other's stacks incrementally.
"""
from __future__ import annotations

from .engine import Machine, Program
from .reader import consult, consult_file, parse_goal
from .runtime import RunStats, Solution, TeamConfig, run_sequential, run_team
from .scheduler import SchedulerConfig

__all__ = [
    "Machine",
    "Program",
    "RunStats",
    "SchedulerConfig",
    "Solution",
    "TeamConfig",
    "consult",
    "consult_file",
    "parse_goal",
    "run_sequential",
    "run_team",
]
