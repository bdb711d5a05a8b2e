from __future__ import annotations

import os
import sys
from collections import Counter
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from thor.bench import programs_dir  # noqa: E402
from thor.engine import Program  # noqa: E402
from thor.reader import consult, consult_file, parse_goal  # noqa: E402
from thor.terms import Atom, Int, Struct, list_items  # noqa: E402

PROGRAMS = programs_dir()


@lru_cache(maxsize=None)
def program(name: str) -> Program:
    return Program(consult_file(PROGRAMS / f"{name}.pl"))


def program_text(text: str) -> Program:
    return Program(consult(text))


def goal(text: str):
    return parse_goal(text)


def pyval(term):
    """Ground term as plain Python: ints, strings, lists, (name, args) tuples."""
    if isinstance(term, Int):
        return term.value
    if isinstance(term, Atom):
        return term.name
    items = list_items(term)
    if items is not None:
        return [pyval(t) for t in items]
    if isinstance(term, Struct):
        return (term.name, tuple(pyval(a) for a in term.args))
    return str(term)


def freeze(x):
    return tuple(freeze(y) for y in x) if isinstance(x, (list, tuple)) else x


def answers(solutions, var: str) -> list:
    return [pyval(s.bindings[var]) for s in solutions]


def multiset(solutions, var: str) -> Counter:
    return Counter(freeze(a) for a in answers(solutions, var))


def cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


@pytest.fixture
def queens_prog() -> Program:
    return program("queens")
