"""Sequential abstract machine.

Execution is structure-copying SLD resolution over three stacks: the heap
(terms and goal continuations), the choice-point stack and the trail.  Each
clause is compiled to a Python function (see :mod:`thor.compiler`) that
unifies the head against the goal arguments and copies the body to the heap
top.

Goal continuations live on the heap.  A clause body is laid out as
``[goal_1 .. goal_k, CONT(parent), ...argument blocks]``, and the
continuation register is the address of the next goal slot to run, so a
choice point captures the whole goal list with a single address.  The
query is laid out as ``[$query, goal_1 .. goal_k, DONE, ...]``.

The same machine runs stand-alone and as a parallel worker; the worker
subclass fills in the poll and getwork hooks.
"""
from __future__ import annotations

from array import array
from dataclasses import dataclass

from .memory import (
    ATOM,
    CONT,
    CP_GOAL,
    CP_H,
    CP_LUB,
    CP_PRED,
    CP_SIZE,
    CP_TR,
    DONE,
    FUN,
    GETWORK,
    INT,
    REF,
    STR,
    Capacities,
    StackOverflow,
    WorkerMemory,
)
from .compiler import compile_clause
from .errors import (  # noqa: F401  (re-exported)
    I64_MAX,
    I64_MIN,
    EvaluationError,
    ExistenceError,
    InstantiationError,
    PrologError,
    PrologTypeError,
    _check_int,
    _intdiv,
    _mod,
)
from .reader import PredicateTable, normalize_vars
from .terms import Atom, Int, Struct, Term, Var

EXHAUSTED, IDLE, STOP = "exhausted", "idle", "stop"

@dataclass(frozen=True)
class Template:
    cells: array
    addr_idx: tuple
    nbody: int
    arity: int
    size: int
    varpos: dict


class Program:
    """Interned atoms and functors plus the compiled clauses of each predicate.

    Read-only once workers start; queries intern their new symbols before
    the team is launched.
    """

    def __init__(self, table: PredicateTable):
        self.table = table
        self.atoms: list[str] = []
        self.atom_ids: dict[str, int] = {}
        self.atom_fid: list[int] = []
        self.functors: list[tuple[str, int]] = []
        self.functor_ids: dict[tuple[str, int], int] = {}
        self.arity: list[int] = []
        self.preds: list = []
        self.builtin: list = []
        self.arith: list = []
        for key in table.builtins:
            self.builtin[self.functor(*key)] = _BUILTIN_FNS[key]
        for key, op in _ARITH_OPS.items():
            self.arith[self.functor(*key)] = op
        for key in table.keys():
            fid = self.functor(*key)
            self.preds[fid] = tuple(
                compile_clause(self, c.head, list(c.body)) for c in table.lookup(key)
            )

    def atom(self, name: str) -> int:
        aid = self.atom_ids.get(name)
        if aid is None:
            aid = self.atom_ids[name] = len(self.atoms)
            self.atoms.append(name)
            self.atom_fid.append(self.functor(name, 0))
        return aid

    def functor(self, name: str, arity: int) -> int:
        key = (name, arity)
        fid = self.functor_ids.get(key)
        if fid is None:
            fid = self.functor_ids[key] = len(self.functors)
            self.functors.append(key)
            self.arity.append(arity)
            self.preds.append(None)
            self.builtin.append(None)
            self.arith.append(None)
        return fid

    def compile(self, head: Term | None, body: list, query: bool = False) -> Template:
        nbody = len(body)
        nslots = 1 + nbody + (1 if (nbody or query) else 0)
        cells = [0] * nslots
        addr = []
        varpos: dict[str, int] = {}
        work = [(head if head is not None else Atom("$query"), 0)]
        work.extend((g, 1 + i) for i, g in enumerate(body))
        work.reverse()
        while work:
            t, pos = work.pop()
            while True:
                if isinstance(t, Var):
                    first = varpos.setdefault(t.name, pos)
                    cells[pos] = (first << 3) | REF
                    addr.append(pos)
                elif isinstance(t, Atom):
                    cells[pos] = (self.atom(t.name) << 3) | ATOM
                elif isinstance(t, Int):
                    cells[pos] = (_check_int(t.value) << 3) | INT
                else:
                    blk = len(cells)
                    n = len(t.args)
                    cells.extend([0] * (n + 1))
                    cells[blk] = (self.functor(t.name, n) << 3) | FUN
                    cells[pos] = (blk << 3) | STR
                    addr.append(pos)
                    # last argument handled in this loop so long lists stay flat
                    for i in range(n - 2, -1, -1):
                        work.append((t.args[i], blk + 1 + i))
                    t, pos = t.args[n - 1], blk + n
                    continue
                break
        if query:
            cells[nslots - 1] = DONE
        arity = head.arity if isinstance(head, Struct) else 0
        return Template(array("q", cells), tuple(sorted(addr)), nbody, arity, len(cells), varpos)


class Machine:
    """One worker's abstract machine over its own stacks."""

    poll = None

    def __init__(self, program: Program, memory: WorkerMemory | None = None, caps: Capacities | None = None):
        self.program = program
        self.mem = memory if memory is not None else WorkerMemory(0, caps)
        self.worker = self.mem.worker
        self.heap, self.cps, self.trail = self.mem.heap, self.mem.cps, self.mem.trail
        self.hb, self.bb, self.tb = self.mem.hb, self.mem.bb, self.mem.tb
        self.heap_cap = self.mem.caps.heap
        self.cps_cap = self.mem.caps.cps
        self.trail_cap = self.mem.caps.trail
        self.sink = None
        self.first = False
        self.query_vars: dict[str, int] = {}
        self.reset()

    def reset(self) -> None:
        self.H = 0
        self.B = 0
        self.TR = 0
        self.hbreg = self.hb
        self.cont = 0
        self.failing = False
        self.load = 0
        self.pub_b = -1
        self.pub_frame = 0
        self.solutions = 0
        self.calls = 0
        self.alternatives = 0
        self.choicepoints = 0

    # ---- query setup -------------------------------------------------
    def load_query(self, goals: list[Term]) -> list[str]:
        tmpl = self.program.compile(None, goals, query=True)
        self.reset()
        self._instantiate(tmpl)
        self.cont = self.hb + 1
        self.query_vars = {
            name: self.hb + pos for name, pos in tmpl.varpos.items() if not name.startswith("_")
        }
        return list(self.query_vars)

    def _instantiate(self, tmpl: Template) -> int:
        h = self.H
        n = tmpl.size
        if h + n > self.heap_cap:
            raise StackOverflow(f"heap overflow in worker {self.worker}")
        heap = self.heap
        heap[h : h + n] = tmpl.cells
        d = (self.hb + h) << 3
        for i in tmpl.addr_idx:
            heap[h + i] += d
        self.H = h + n
        return h

    # ---- term primitives ---------------------------------------------
    def deref(self, a: int) -> tuple[int, int]:
        """Final (address, cell) of the REF chain starting at `a`."""
        heap, hb = self.heap, self.hb
        c = heap[a - hb]
        while not c & 7:
            t = c >> 3
            if t == a:
                break
            a = t
            c = heap[a - hb]
        return a, c

    def heap_overflow(self) -> None:
        raise StackOverflow(f"heap overflow in worker {self.worker}")

    def bind(self, a: int, value: int) -> None:
        """Store `value` in unbound cell `a`, trailing iff the binding is conditional."""
        self.heap[a - self.hb] = value
        if a < self.hbreg:
            tr = self.TR
            if tr >= self.trail_cap:
                raise StackOverflow(f"trail overflow in worker {self.worker}")
            self.trail[tr] = a
            self.TR = tr + 1

    def unify(self, a: int, b: int) -> bool:
        """Unify the terms at addresses `a` and `b`; on failure every binding is undone."""
        saved_hbreg, tr0 = self.hbreg, self.TR
        self.hbreg = 1 << 62  # trail everything for the duration of the attempt
        try:
            ok = self._unify(a, b)
        finally:
            self.hbreg = saved_hbreg
        heap, hb, trail = self.heap, self.hb, self.trail
        if not ok:
            for i in range(tr0, self.TR):
                x = trail[i]
                heap[x - hb] = x << 3
            self.TR = tr0
            return False
        # drop the entries that were only needed for the undo
        keep = tr0
        for i in range(tr0, self.TR):
            x = trail[i]
            if x < saved_hbreg:
                trail[keep] = x
                keep += 1
        self.TR = keep
        return True

    def _unify(self, a: int, b: int) -> bool:
        heap, hb = self.heap, self.hb
        pending = None
        while True:
            ca = heap[a - hb]
            while not ca & 7:
                t = ca >> 3
                if t == a:
                    break
                a = t
                ca = heap[a - hb]
            cb = heap[b - hb]
            while not cb & 7:
                t = cb >> 3
                if t == b:
                    break
                b = t
                cb = heap[b - hb]
            if a != b:
                ta = ca & 7
                tb = cb & 7
                if not ta:
                    if not tb and a < b:
                        # both unbound: the younger cell points at the older one
                        heap[b - hb] = ca
                        if b < self.hbreg:
                            self._trail(b)
                    else:
                        heap[a - hb] = cb
                        if a < self.hbreg:
                            self._trail(a)
                elif not tb:
                    heap[b - hb] = ca
                    if b < self.hbreg:
                        self._trail(b)
                elif ta == 1 and tb == 1:
                    fa = ca >> 3
                    fb = cb >> 3
                    if fa != fb:
                        fun = heap[fa - hb]
                        if fun != heap[fb - hb]:
                            return False
                        n = self.program.arity[fun >> 3]
                        if pending is None:
                            pending = []
                        for i in range(n, 1, -1):
                            pending.append(fa + i)
                            pending.append(fb + i)
                        a = fa + 1
                        b = fb + 1
                        continue
                elif ca != cb:
                    return False
            if not pending:
                return True
            b = pending.pop()
            a = pending.pop()

    def _trail(self, a: int) -> None:
        tr = self.TR
        if tr >= self.trail_cap:
            raise StackOverflow(f"trail overflow in worker {self.worker}")
        self.trail[tr] = a
        self.TR = tr + 1

    def eval_arith(self, a: int) -> int:
        heap, hb = self.heap, self.hb
        c = heap[a - hb]
        while not c & 7:
            t = c >> 3
            if t == a:
                raise InstantiationError("arithmetic on an unbound variable")
            a = t
            c = heap[a - hb]
        tag = c & 7
        if tag == INT:
            return c >> 3
        if tag == ATOM:
            raise PrologTypeError(f"type_error(evaluable, {self.program.atoms[c >> 3]}/0)")
        if tag != STR:
            raise PrologTypeError("type_error(evaluable)")
        fa = c >> 3
        fid = heap[fa - hb] >> 3
        op = self.program.arith[fid]
        if op is None:
            name, arity = self.program.functors[fid]
            raise PrologTypeError(f"type_error(evaluable, {name}/{arity})")
        if self.program.arity[fid] == 1:
            v = op(self.eval_arith(fa + 1))
        else:
            v = op(self.eval_arith(fa + 1), self.eval_arith(fa + 2))
        if not I64_MIN <= v <= I64_MAX:
            raise EvaluationError("int_overflow")
        return v

    def identical(self, a: int, b: int) -> bool:
        heap, hb = self.heap, self.hb
        todo = [(a, b)]
        while todo:
            a, b = todo.pop()
            a, ca = self.deref(a)
            b, cb = self.deref(b)
            if a == b:
                continue
            if ca & 7 == STR and cb & 7 == STR:
                fa, fb = ca >> 3, cb >> 3
                fun = heap[fa - hb]
                if fun != heap[fb - hb]:
                    return False
                todo.extend((fa + i, fb + i) for i in range(1, self.program.arity[fun >> 3] + 1))
            elif ca != cb or ca & 7 == REF:
                return False
        return True

    def decode(self, a: int, depth: int = 1000) -> Term:
        """Deep copy of the heap term at `a` as a source term."""
        a, c = self.deref(a)
        tag = c & 7
        if tag == REF:
            return Var(f"_G{a - self.hb}")
        if tag == ATOM:
            return Atom(self.program.atoms[c >> 3])
        if tag == INT:
            return Int(c >> 3)
        if tag != STR:
            raise ValueError(f"cell with tag {tag} is not a term")
        if depth <= 0:
            return Atom("...")
        fa = c >> 3
        name, arity = self.program.functors[self.heap[fa - self.hb] >> 3]
        if name == "." and arity == 2:
            items = []
            while True:
                items.append(self.decode(fa + 1, depth - 1))
                a, c = self.deref(fa + 2)
                if c & 7 != STR or len(items) >= depth:
                    break
                fa = c >> 3
                if self.program.functors[self.heap[fa - self.hb] >> 3] != (".", 2):
                    break
            tail = self.decode(a, depth - 1) if len(items) < depth else Atom("...")
            for item in reversed(items):
                tail = Struct(".", (item, tail))
            return tail
        return Struct(name, tuple(self.decode(fa + i, depth - 1) for i in range(1, arity + 1)))

    def solution_found(self) -> None:
        if self.sink is not None:
            self.sink(self.snapshot())

    def encode_answer(self) -> tuple:
        """The query variables' values as a flat preorder tuple of cells.

        Unbound variables become REF cells numbered by first occurrence, so
        equal answers encode identically on every worker.
        """
        heap, hb = self.heap, self.hb
        arity = self.program.arity
        out = []
        seen: dict[int, int] = {}
        todo = list(reversed(self.query_vars.values()))
        while todo:
            a = todo.pop()
            c = heap[a - hb]
            while not c & 7:
                t = c >> 3
                if t == a:
                    break
                a = t
                c = heap[a - hb]
            tag = c & 7
            if tag == STR:
                fa = c >> 3
                fun = heap[fa - hb]
                out.append(fun)
                todo.extend(range(fa + arity[fun >> 3], fa, -1))
            elif tag == REF:
                out.append(seen.setdefault(a, len(seen)) << 3)
            else:
                out.append(c)
        return tuple(out)

    def snapshot(self) -> dict[str, Term]:
        names = list(self.query_vars)
        values = normalize_solution([self.decode(self.query_vars[n]) for n in names])
        return dict(zip(names, values))

    # ---- choice points -----------------------------------------------
    def push_choicepoint(self, alt: int, goal: int, fid: int, untried: int) -> None:
        b = self.B
        if b + CP_SIZE > self.cps_cap:
            raise StackOverflow(f"choice-point overflow in worker {self.worker}")
        cps = self.cps
        h = self.hb + self.H
        lub = untried + (cps[b - CP_SIZE + CP_LUB] if b else 0)
        cps[b] = alt
        cps[b + 1] = 0
        cps[b + 2] = lub
        cps[b + 3] = h
        cps[b + 4] = self.tb + self.TR
        cps[b + 5] = goal
        cps[b + 6] = goal + 1
        cps[b + 7] = fid
        self.B = b + CP_SIZE
        self.hbreg = h
        self.load += untried
        self.choicepoints += 1
        if self.poll is not None:
            self.poll()

    def unwind_trail(self, tr: int) -> None:
        heap, hb, trail = self.heap, self.hb, self.trail
        for i in range(self.TR - 1, tr - 1, -1):
            x = trail[i]
            heap[x - hb] = x << 3
        self.TR = tr

    def restore(self, b: int) -> None:
        """Reset heap, trail and registers to the state saved in the record at `b`."""
        cps = self.cps
        self.unwind_trail(cps[b + CP_TR] - self.tb)
        self.H = cps[b + CP_H] - self.hb
        self.hbreg = cps[b + CP_H]

    def pop_choicepoint(self) -> None:
        b = self.B = self.B - CP_SIZE
        self.hbreg = self.cps[b - CP_SIZE + CP_H] if b else self.hb

    def getwork_at(self, b: int) -> int:
        raise RuntimeError("public choice point in a sequential run")

    # ---- the resolution loop -------------------------------------------
    def backtrack(self):
        """Resume at the youngest choice point.  None when resumed, else a status."""
        b = self.B - CP_SIZE
        if b < 0:
            return EXHAUSTED
        cps, heap, hb, trail = self.cps, self.heap, self.hb, self.trail
        tr = cps[b + CP_TR] - self.tb
        for i in range(self.TR - 1, tr - 1, -1):
            x = trail[i]
            heap[x - hb] = x << 3
        self.TR = tr
        h = cps[b + CP_H]
        self.H = h - hb
        self.hbreg = h
        alt = cps[b]
        fid = cps[b + CP_PRED]
        clauses = self.program.preds[fid]
        if alt == GETWORK:
            idx = self.getwork_at(b)
            if idx < 0:
                return IDLE
        else:
            idx = alt
            if alt + 1 < len(clauses):
                cps[b] = alt + 1
                cps[b + CP_LUB] -= 1
            else:
                self.B = b
                self.hbreg = cps[b - CP_SIZE + CP_H] if b else hb
            self.load -= 1
        goal = cps[b + CP_GOAL]
        self.failing = False
        self.alternatives += 1
        c = heap[goal - hb]
        if c & 7 == REF:
            c = self.deref(goal)[1]
        if not clauses[idx](self, c >> 3 if c & 7 == STR else 0, goal):
            self.failing = True
        return None

    def _goal_args(self, goal: int) -> int:
        a, c = self.deref(goal)
        return c >> 3 if c & 7 == STR else 0

    def run(self, resume: bool = False):
        """Run from the current registers until exhausted, idle or stopped."""
        if resume:
            self.failing = True
        heap, hb = self.heap, self.hb
        program = self.program
        preds, builtin, atom_fid = program.preds, program.builtin, program.atom_fid
        while True:
            if self.failing:
                status = self.backtrack()
                if status is not None:
                    return status
                continue
            cont = self.cont
            c = heap[cont - hb]
            tag = c & 7
            if tag == CONT:
                self.cont = c >> 3
                continue
            if tag == DONE:
                self.solutions += 1
                self.solution_found()
                if self.first:
                    return STOP
                self.failing = True
                continue
            a = cont
            while not tag:
                t = c >> 3
                if t == a:
                    raise InstantiationError("call of an unbound variable")
                a = t
                c = heap[a - hb]
                tag = c & 7
            if tag == STR:
                ga = c >> 3
                fid = heap[ga - hb] >> 3
            elif tag == ATOM:
                ga = 0
                fid = atom_fid[c >> 3]
            else:
                raise PrologTypeError("type_error(callable)")
            self.calls += 1
            fn = builtin[fid]
            if fn is not None:
                if fn(self, ga):
                    self.cont = cont + 1
                else:
                    self.failing = True
                continue
            clauses = preds[fid]
            if clauses is None:
                name, arity = program.functors[fid]
                raise ExistenceError(f"unknown procedure {name}/{arity}")
            n = len(clauses)
            if n > 1:
                self.push_choicepoint(1, cont, fid, n - 1)
            self.alternatives += 1
            if not clauses[0](self, ga, cont):
                self.failing = True

    def solve(self, goals: list[Term], mode: str = "all", sink=None) -> int:
        """Run `goals` to completion (or first solution); returns the solution count."""
        self.load_query(goals)
        self.first = mode == "first"
        self.sink = sink
        self.run()
        return self.solutions

    # ---- introspection used by tests and the copying audit -------------
    def choicepoint(self, b: int) -> dict:
        from .memory import CP_FIELD_NAMES

        return {name: self.cps[b + i] for i, name in enumerate(CP_FIELD_NAMES)}

    def youngest_private_lub(self) -> int:
        b = self.B - CP_SIZE
        if b < 0 or b == self.pub_b:
            return 0
        return self.cps[b + CP_LUB]


def decode_answer(program: Program, names: list[str], cells: tuple) -> dict[str, Term]:
    """Inverse of :meth:`Machine.encode_answer`."""
    pos = 0

    def term() -> Term:
        nonlocal pos
        # right spines (lists) are walked iteratively
        spine: list[tuple[str, list]] = []
        while True:
            c = cells[pos]
            pos += 1
            tag = c & 7
            if tag == FUN:
                name, n = program.functors[c >> 3]
                if n == 0:
                    t = Atom(name)
                else:
                    args = [term() for _ in range(n - 1)]
                    spine.append((name, args))
                    continue
            elif tag == REF:
                t = Var(f"_G{c >> 3}")
            elif tag == ATOM:
                t = Atom(program.atoms[c >> 3])
            else:
                t = Int(c >> 3)
            break
        while spine:
            name, args = spine.pop()
            t = Struct(name, (*args, t))
        return t

    return {name: term() for name in names}


def normalize_solution(values: list[Term]) -> list[Term]:
    """Rename unbound variables to _G0, _G1, ... by first occurrence."""
    return list(normalize_vars(values, "_G"))


# ---- built-ins -------------------------------------------------------
def _bi_true(m: Machine, ga: int) -> bool:
    return True


def _bi_fail(m: Machine, ga: int) -> bool:
    return False


def _bi_unify(m: Machine, ga: int) -> bool:
    return m._unify(ga + 1, ga + 2)


def _bi_identical(m: Machine, ga: int) -> bool:
    return m.identical(ga + 1, ga + 2)


def _bi_not_identical(m: Machine, ga: int) -> bool:
    return not m.identical(ga + 1, ga + 2)


def _bi_is(m: Machine, ga: int) -> bool:
    v = _check_int(m.eval_arith(ga + 2))
    a, c = m.deref(ga + 1)
    if not c & 7:
        m.bind(a, (v << 3) | INT)
        return True
    return c == (v << 3) | INT


def _compare(test):
    def fn(m: Machine, ga: int) -> bool:
        return test(m.eval_arith(ga + 1), m.eval_arith(ga + 2))

    return fn


_BUILTIN_FNS = {
    ("true", 0): _bi_true,
    ("fail", 0): _bi_fail,
    ("=", 2): _bi_unify,
    ("==", 2): _bi_identical,
    ("\\==", 2): _bi_not_identical,
    ("is", 2): _bi_is,
    ("=:=", 2): _compare(lambda x, y: x == y),
    ("=\\=", 2): _compare(lambda x, y: x != y),
    ("<", 2): _compare(lambda x, y: x < y),
    (">", 2): _compare(lambda x, y: x > y),
    ("=<", 2): _compare(lambda x, y: x <= y),
    (">=", 2): _compare(lambda x, y: x >= y),
}


_ARITH_OPS = {
    ("+", 2): lambda x, y: x + y,
    ("-", 2): lambda x, y: x - y,
    ("*", 2): lambda x, y: x * y,
    ("//", 2): _intdiv,
    ("mod", 2): _mod,
    ("-", 1): lambda x: -x,
}


def solve(table: PredicateTable, goals: list[Term], mode: str = "all", sink=None,
          caps: Capacities | None = None) -> int:
    """Sequential all- or first-solution run of `goals` against `table`."""
    return Machine(Program(table), caps=caps).solve(goals, mode, sink)
