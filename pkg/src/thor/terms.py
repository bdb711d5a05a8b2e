"""Source-level terms and their textual form.

These are the immutable values the reader produces and the engine hands
back as solutions.  They are plain frozen dataclasses, so solutions can be
hashed, compared as multisets and pickled across worker processes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True)
class Int:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Struct:
    name: str
    args: tuple

    def __post_init__(self) -> None:
        if not self.args:
            raise ValueError("compound terms need at least one argument")

    @property
    def arity(self) -> int:
        return len(self.args)

    def __str__(self) -> str:
        return format_term(self)


Term = Union[Var, Atom, Int, Struct]

NIL = Atom("[]")


def make_list(items, tail: Term = NIL) -> Term:
    out = tail
    for item in reversed(list(items)):
        out = Struct(".", (item, out))
    return out


def list_items(term: Term) -> list | None:
    """Python list for a proper list term, or None."""
    items = []
    while isinstance(term, Struct) and term.name == "." and term.arity == 2:
        items.append(term.args[0])
        term = term.args[1]
    return items if term == NIL else None


def variables(term: Term) -> Iterator[Var]:
    """Variables of `term` in depth-first, left-to-right order (repeats included)."""
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            yield t
        elif isinstance(t, Struct):
            stack.extend(reversed(t.args))


# Operator table shared by the parser and the printer: name -> (priority, type).
INFIX_OPS = {
    ":-": (1200, "xfx"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "is": (700, "xfx"),
    "==": (700, "xfx"),
    "\\==": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "<": (700, "xfx"),
    ">": (700, "xfx"),
    "=<": (700, "xfx"),
    ">=": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "*": (400, "yfx"),
    "//": (400, "yfx"),
    "mod": (400, "yfx"),
}
PREFIX_OPS = {"-": (200, "fy")}

SYMBOL_CHARS = frozenset("+-*/\\^<>=~:.?@#&$")
SOLO_ATOMS = frozenset({"[]", "!", ";", ","})


def _atom_text(name: str) -> str:
    if name in SOLO_ATOMS and name != ",":
        return name
    if name and name[0].islower() and all(c.isalnum() or c == "_" for c in name):
        return name
    if name and all(c in SYMBOL_CHARS for c in name) and name != ".":
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n")
    return f"'{escaped}'"


def format_term(term: Term, max_prec: int = 1200, depth: int = 10_000) -> str:
    """Render `term` as parseable text; subterms nested deeper than `depth` print as `...`."""
    if depth <= 0:
        return "..."
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Int):
        text = str(term.value)
        return f"({text})" if term.value < 0 and max_prec < 200 else text
    if isinstance(term, Atom):
        text = _atom_text(term.name)
        if term.name in INFIX_OPS or term.name in PREFIX_OPS:
            return f"({text})" if max_prec < 1200 else text
        return text
    name, args = term.name, term.args
    if name == "." and len(args) == 2:
        return _format_list(term, depth)
    if len(args) == 2 and name in INFIX_OPS:
        prec, kind = INFIX_OPS[name]
        lp = prec if kind == "yfx" else prec - 1
        rp = prec if kind == "xfy" else prec - 1
        left = format_term(args[0], lp, depth - 1)
        right = format_term(args[1], rp, depth - 1)
        text = f"{left}, {right}" if name == "," else f"{left} {name} {right}"
        return f"({text})" if prec > max_prec else text
    if len(args) == 1 and name in PREFIX_OPS:
        prec, _ = PREFIX_OPS[name]
        inner = format_term(args[0], prec, depth - 1)
        word = inner.split("(", 1)[0]
        if inner[0] in SYMBOL_CHARS or word in INFIX_OPS:
            # "-+(a)" would lex as one atom and "- +(a)" or "-mod(a)" as an infix operator
            return f"-({format_term(args[0], 999, depth - 1)})"
        # keep "- 1" apart from the literal -1
        sep = " " if isinstance(args[0], Int) or inner[0] == "(" else ""
        text = f"-{sep}{inner}"
        return f"({text})" if prec > max_prec else text
    inner = ", ".join(format_term(a, 999, depth - 1) for a in args)
    return f"{_atom_text(name)}({inner})"


def _format_list(term: Term, depth: int) -> str:
    parts = []
    while isinstance(term, Struct) and term.name == "." and term.arity == 2:
        if len(parts) >= depth:
            parts.append("...")
            term = NIL
            break
        parts.append(format_term(term.args[0], 999, depth - 1))
        term = term.args[1]
    if term == NIL:
        return "[" + ", ".join(parts) + "]"
    return "[" + ", ".join(parts) + "|" + format_term(term, 999, depth - 1) + "]"
