"""Tokenizer, operator-precedence parser and predicate database.

The accepted language is a small pure subset: atoms (plain, symbolic or
quoted), integers, variables, compound terms, list sugar and the fixed
operator table in :mod:`thor.terms`.  Clause order is preserved exactly and
no indexing is done, so a predicate's untried alternatives are always the
tail of its clause list.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .terms import (
    INFIX_OPS,
    NIL,
    PREFIX_OPS,
    SYMBOL_CHARS,
    Atom,
    Int,
    Struct,
    Term,
    Var,
    format_term,
    make_list,
)

ATOM, VAR, INT, PUNCT, OP, END = "atom", "var", "int", "punct", "op", "end"

WORD_OPS = frozenset(name for name in INFIX_OPS if name[0].isalpha())
PUNCT_CHARS = frozenset("()[],|")

BUILTINS = frozenset(
    {
        ("true", 0),
        ("fail", 0),
        ("=", 2),
        ("==", 2),
        ("\\==", 2),
        ("is", 2),
        ("=:=", 2),
        ("=\\=", 2),
        ("<", 2),
        (">", 2),
        ("=<", 2),
        (">=", 2),
    }
)


class ReaderError(Exception):
    """Lexical or syntax error at a source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.message = message
        self.line = line
        self.col = col


class LexError(ReaderError):
    pass


class ParseError(ReaderError):
    pass


class ConsultError(Exception):
    """All errors found while loading one source text."""

    def __init__(self, errors: list[Exception]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int
    offset: int

    @property
    def end(self) -> int:
        return self.offset + len(self.text)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    line, line_start = 1, 0

    def here(pos: int) -> tuple[int, int]:
        return line, pos - line_start + 1

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line, line_start = line + 1, i
            continue
        if c.isspace():
            i += 1
            continue
        if c == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start = i
        ln, col = here(i)
        if c.isdigit():
            while i < n and text[i].isdigit():
                i += 1
            kind = INT
        elif c.isalpha() or c == "_":
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            if c.isupper() or c == "_":
                kind = VAR
            else:
                kind = OP if word in WORD_OPS else ATOM
        elif c == "'":
            i += 1
            while True:
                if i >= n or text[i] == "\n":
                    raise LexError("unterminated quoted atom", ln, col)
                if text[i] == "\\":
                    i += 2
                elif text[i] == "'":
                    if i + 1 < n and text[i + 1] == "'":
                        i += 2
                    else:
                        i += 1
                        break
                else:
                    i += 1
            kind = ATOM
        elif c in PUNCT_CHARS:
            i += 1
            kind = PUNCT
        elif c in "!;":
            i += 1
            kind = ATOM
        elif c in SYMBOL_CHARS:
            while i < n and text[i] in SYMBOL_CHARS:
                i += 1
            word = text[start:i]
            if word == "." and (i == n or text[i].isspace() or text[i] == "%"):
                kind = END
            else:
                kind = OP if word in INFIX_OPS or word in PREFIX_OPS else ATOM
        else:
            raise LexError(f"illegal character {c!r}", ln, col)
        tokens.append(Token(kind, text[start:i], ln, col, start))
    return tokens


def _unquote(text: str) -> str:
    if not text.startswith("'"):
        return text
    body, out, i = text[1:-1], [], 0
    escapes = {"n": "\n", "t": "\t", "\\": "\\", "'": "'"}
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            out.append(escapes.get(body[i + 1], body[i + 1]))
            i += 2
        elif c == "'" and body[i + 1 : i + 2] == "'":
            out.append("'")
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.anon = 0

    def peek(self, k: int = 0) -> Token | None:
        j = self.pos + k
        return self.tokens[j] if j < len(self.tokens) else None

    def fail(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek() or (self.tokens[-1] if self.tokens else None)
        if tok is None:
            return ParseError(message, 1, 1)
        return ParseError(message, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok is None or tok.text != text or tok.kind not in (PUNCT, END):
            found = "end of input" if tok is None else repr(tok.text)
            raise self.fail(f"expected {text!r}, found {found}", tok)
        self.pos += 1
        return tok

    def _adjacent_paren(self, tok: Token) -> bool:
        nxt = self.peek(1)
        return nxt is not None and nxt.text == "(" and nxt.kind == PUNCT and nxt.offset == tok.end

    def _starts_term(self, tok: Token | None) -> bool:
        if tok is None or tok.kind == END:
            return False
        if tok.kind == PUNCT:
            return tok.text in "([" and len(tok.text) == 1
        if tok.kind == OP:
            return tok.text in PREFIX_OPS or tok.text not in INFIX_OPS
        return True

    def primary(self, max_prec: int) -> tuple[Term, int]:
        tok = self.peek()
        if tok is None:
            raise self.fail("unexpected end of clause")
        k = tok.kind
        if k == INT:
            self.pos += 1
            return Int(int(tok.text)), 0
        if k == VAR:
            self.pos += 1
            if tok.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}"), 0
            return Var(tok.text), 0
        if k == PUNCT and tok.text == "(":
            self.pos += 1
            term, _ = self.parse(1200)
            self.expect(")")
            return term, 0
        if k == PUNCT and tok.text == "[":
            return self.list_term(), 0
        if k in (ATOM, OP):
            name = _unquote(tok.text)
            if self._adjacent_paren(tok):
                self.pos += 2
                args = [self.parse(999)[0]]
                while self.peek() is not None and self.peek().text == "," and self.peek().kind == PUNCT:
                    self.pos += 1
                    args.append(self.parse(999)[0])
                self.expect(")")
                return Struct(name, tuple(args)), 0
            if k == OP and tok.text in PREFIX_OPS:
                nxt = self.peek(1)
                if nxt is not None and nxt.kind == INT and nxt.offset == tok.end:
                    self.pos += 2
                    return Int(-int(nxt.text)), 0
                prec, kind = PREFIX_OPS[tok.text]
                if self._starts_term(nxt) and prec <= max_prec:
                    self.pos += 1
                    arg, _ = self.parse(prec if kind == "fy" else prec - 1)
                    return Struct(name, (arg,)), prec
            self.pos += 1
            return Atom(name), 0
        raise self.fail(f"unexpected {tok.text!r}", tok)

    def list_term(self) -> Term:
        self.expect("[")
        tok = self.peek()
        if tok is not None and tok.kind == PUNCT and tok.text == "]":
            self.pos += 1
            return NIL
        items = [self.parse(999)[0]]
        tail: Term = NIL
        while True:
            tok = self.peek()
            if tok is not None and tok.kind == PUNCT and tok.text == ",":
                self.pos += 1
                items.append(self.parse(999)[0])
            elif tok is not None and tok.kind == PUNCT and tok.text == "|":
                self.pos += 1
                tail = self.parse(999)[0]
                break
            else:
                break
        self.expect("]")
        return make_list(items, tail)

    def parse(self, max_prec: int) -> tuple[Term, int]:
        left, left_prec = self.primary(max_prec)
        while True:
            tok = self.peek()
            if tok is None or tok.kind not in (OP, PUNCT) or tok.text not in INFIX_OPS:
                return left, left_prec
            prec, kind = INFIX_OPS[tok.text]
            if prec > max_prec:
                return left, left_prec
            left_max = prec if kind == "yfx" else prec - 1
            right_max = prec if kind == "xfy" else prec - 1
            if left_prec > left_max:
                raise self.fail(f"operator priority clash at {tok.text!r}", tok)
            self.pos += 1
            right, _ = self.parse(right_max)
            left, left_prec = Struct(tok.text, (left, right)), prec


@dataclass(frozen=True)
class Clause:
    head: Term
    body: tuple = ()
    index: int = 0

    @property
    def key(self) -> tuple[str, int]:
        return predicate_key(self.head)

    def __str__(self) -> str:
        return format_clause(self)


def predicate_key(term: Term) -> tuple[str, int]:
    if isinstance(term, Atom):
        return term.name, 0
    if isinstance(term, Struct):
        return term.name, term.arity
    raise TypeError(f"not callable: {term}")


def conjuncts(term: Term) -> list[Term]:
    goals = []
    while isinstance(term, Struct) and term.name == "," and term.arity == 2:
        goals.append(term.args[0])
        term = term.args[1]
    goals.append(term)
    return goals


def parse_term(tokens: list[Token], max_prec: int = 1200) -> Term:
    """Parse a whole token list (optionally ending in '.') as one term."""
    if tokens and tokens[-1].kind == END:
        tokens = tokens[:-1]
    if not tokens:
        raise ParseError("empty term", 1, 1)
    p = _Parser(tokens)
    term, _ = p.parse(max_prec)
    if p.peek() is not None:
        tok = p.peek()
        if tok.kind == OP and tok.text in INFIX_OPS:
            raise p.fail(f"operator priority clash at {tok.text!r}", tok)
        raise p.fail(f"unexpected {tok.text!r}", tok)
    return term


def parse_clause(tokens: list[Token]) -> Clause:
    if not tokens or tokens[-1].kind != END:
        tok = tokens[-1] if tokens else None
        raise ParseError("clause must end with '.'", tok.line if tok else 1, tok.col if tok else 1)
    term = parse_term(tokens)
    first = tokens[0]
    if isinstance(term, Struct) and term.name == ":-" and term.arity == 2:
        head, body = term.args[0], conjuncts(term.args[1])
    else:
        head, body = term, []
    if not isinstance(head, (Atom, Struct)):
        raise ParseError(f"clause head must be callable, got {format_term(head)}", first.line, first.col)
    for goal in body:
        if isinstance(goal, Int):
            raise ParseError(f"body goal must be callable, got {goal.value}", first.line, first.col)
    return Clause(head, tuple(body))


def parse_goal(text: str) -> list[Term]:
    """Parse query text into its list of conjunct goals."""
    tokens = tokenize(text.strip())
    if not tokens:
        raise ParseError("empty goal", 1, 1)
    if tokens[-1].kind != END:
        last = tokens[-1]
        tokens.append(Token(END, ".", last.line, last.col + len(last.text), last.end))
    term = parse_term(tokens)
    goals = conjuncts(term)
    for goal in goals:
        if isinstance(goal, Int):
            raise ParseError("goal must be callable", tokens[0].line, tokens[0].col)
    return goals


def split_clauses(tokens: list[Token]) -> list[list[Token]]:
    chunks, current = [], []
    for tok in tokens:
        current.append(tok)
        if tok.kind == END:
            chunks.append(current)
            current = []
    if current:
        chunks.append(current)
    return chunks


@dataclass
class PredicateTable:
    clauses: dict = field(default_factory=dict)
    builtins: frozenset = BUILTINS

    def lookup(self, key: tuple[str, int]) -> list[Clause]:
        return self.clauses.get(key, [])

    def __contains__(self, key) -> bool:
        return key in self.clauses or key in self.builtins

    def add(self, clause: Clause) -> Clause:
        key = clause.key
        if key in self.builtins:
            raise PermissionError(f"cannot redefine built-in {key[0]}/{key[1]}")
        bucket = self.clauses.setdefault(key, [])
        clause = Clause(clause.head, clause.body, len(bucket))
        bucket.append(clause)
        return clause

    def keys(self):
        return self.clauses.keys()


def consult(text: str, table: PredicateTable | None = None) -> PredicateTable:
    """Parse `text` and append its clauses to `table` (a new one by default)."""
    table = PredicateTable() if table is None else table
    errors: list[Exception] = []
    for chunk in split_clauses(tokenize(text)):
        try:
            clause = parse_clause(chunk)
        except ParseError as exc:
            errors.append(exc)
            continue
        try:
            table.add(clause)
        except PermissionError as exc:
            errors.append(ReaderError(str(exc), chunk[0].line, chunk[0].col))
    if errors:
        raise ConsultError(errors)
    return table


def consult_file(path, table: PredicateTable | None = None) -> PredicateTable:
    with open(path, encoding="utf-8") as fh:
        return consult(fh.read(), table)


def format_clause(clause: Clause) -> str:
    if not clause.body:
        return format_term(clause.head, 1199) + "."
    body = ", ".join(format_term(g, 999) for g in clause.body)
    return f"{format_term(clause.head, 1199)} :- {body}."


def normalize_vars(terms: Iterable[Term], prefix: str = "_V") -> tuple:
    """Rename variables to _V0, _V1, ... by first occurrence across `terms`."""
    mapping: dict[str, Var] = {}

    def walk(t: Term) -> Term:
        if isinstance(t, Var):
            if t.name not in mapping:
                mapping[t.name] = Var(f"{prefix}{len(mapping)}")
            return mapping[t.name]
        if isinstance(t, Struct):
            return Struct(t.name, tuple(walk(a) for a in t.args))
        return t

    return tuple(walk(t) for t in terms)
