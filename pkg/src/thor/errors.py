"""Runtime errors raised by the engine and integer range helpers."""
from __future__ import annotations

from .memory import INT_MAX, INT_MIN

I64_MIN, I64_MAX = -(1 << 63), (1 << 63) - 1


class PrologError(Exception):
    pass


class InstantiationError(PrologError):
    pass


class PrologTypeError(PrologError):
    pass


class EvaluationError(PrologError):
    pass


class ExistenceError(PrologError):
    pass


def _check_int(v: int) -> int:
    """`v` if it fits a tagged integer cell."""
    if not INT_MIN <= v <= INT_MAX:
        raise EvaluationError(f"int_overflow: {v} does not fit a tagged cell")
    return v


def _intdiv(x: int, y: int) -> int:
    if y == 0:
        raise EvaluationError("zero_divisor")
    q = abs(x) // abs(y)
    return q if (x < 0) == (y < 0) else -q


def _mod(x: int, y: int) -> int:
    if y == 0:
        raise EvaluationError("zero_divisor")
    return x % y
