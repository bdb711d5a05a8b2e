"""Clause compiler: each clause becomes a specialised Python function.

The generated function matches the clause head against the goal's
argument cells (read mode on existing structures, write mode building
fresh structures for unbound goal arguments), then lays the body out at
the heap top exactly as :meth:`Program.compile` would for a template:
``[goal_1 .. goal_k, CONT(parent), ...blocks]``.  On success it sets
``m.H`` and ``m.cont`` and returns True; on failure it returns False and
leaves cleanup to backtracking.

Bindings go through the same conditional-trailing rule as
:meth:`Machine.bind`.

Arithmetic tests and ``is/2`` goals at the front of a body are evaluated
inline right after head unification (nothing else can run in between), so
they never reach the heap.  They still count as calls.
"""
from __future__ import annotations

from array import array
from collections import Counter

from .memory import ATOM, CONT, FUN, INT, REF, STR
from .errors import EvaluationError, I64_MAX, I64_MIN, _check_int, _intdiv, _mod
from .terms import Atom, Int, Struct, Term, Var, variables


_COMPARE = {"=:=": "==", "=\\=": "!=", "<": "<", ">": ">", "=<": "<=", ">=": ">="}
_ARITH = {
    ("+", 2): "{x} + {y}",
    ("-", 2): "{x} - {y}",
    ("*", 2): "{x} * {y}",
    ("//", 2): "{x} // {y} if {x} >= 0 and {y} > 0 else idiv({x}, {y})",
    ("mod", 2): "{x} % {y} if {y} else imod({x}, {y})",
}
_CHECKED = {("+", 2), ("-", 2), ("*", 2), ("//", 2)}


def _ck(v: int) -> int:
    if not I64_MIN <= v <= I64_MAX:
        raise EvaluationError("int_overflow")
    return v


def _occurrences(head: Term, body: list) -> Counter:
    counts: Counter = Counter()
    for t in [head, *body]:
        counts.update(v.name for v in variables(t))
    return counts


def _size(t: Term) -> int:
    """Cells needed to build `t` below its slot."""
    total, stack = 0, [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Struct):
            total += 1 + len(t.args)
            stack.extend(t.args)
    return total


class _Gen:
    def __init__(self, program, counts: Counter):
        self.program = program
        self.counts = counts
        self.lines: list[str] = []
        self.depth = 1
        self.tmp = 0
        self.local: dict[str, str] = {}
        # variables whose value is an already computed cell (from inline is/2)
        self.value: dict[str, str] = {}
        # integer value of a variable already evaluated by an earlier guard
        self.ints: dict[str, str] = {}

    def emit(self, line: str) -> None:
        self.lines.append("    " * self.depth + line)

    def fresh(self, prefix: str) -> str:
        self.tmp += 1
        return f"{prefix}{self.tmp}"

    def const(self, t: Term) -> int:
        if isinstance(t, Atom):
            return (self.program.atom(t.name) << 3) | ATOM
        return (_check_int(t.value) << 3) | INT

    def void(self, v: Var) -> bool:
        return self.counts[v.name] == 1

    def deref(self, addr_expr: str) -> tuple[str, str]:
        a, c, t = self.fresh("a"), self.fresh("c"), self.fresh("t")
        self.emit(f"{a} = {addr_expr}")
        self.emit(f"{c} = heap[{a} - hb]")
        self.emit(f"while not {c} & 7:")
        self.emit(f"    {t} = {c} >> 3")
        self.emit(f"    if {t} == {a}: break")
        self.emit(f"    {a} = {t}")
        self.emit(f"    {c} = heap[{a} - hb]")
        return a, c

    def unify_local(self, name: str, addr_expr: str) -> None:
        """Unify a variable seen earlier in the head with the cell at `addr_expr`."""
        a, c = self.deref(addr_expr)
        self.emit(f"if {c} & 7:")
        self.emit(f"    if not m._unify({name}, {a}): return False")
        self.emit("else:")
        self.depth += 1
        b, cb = self.deref(name)
        self.emit(f"if {b} != {a}:")
        self.depth += 1
        self.emit(f"if not {cb} & 7 and {b} > {a}:")
        self.depth += 1
        self.bind(b, f"{a} << 3")
        self.depth -= 1
        self.emit("else:")
        self.depth += 1
        self.bind(a, f"{cb} if {cb} & 7 else {b} << 3")
        self.depth -= 3

    def bind(self, a: str, value_expr: str) -> None:
        self.emit(f"heap[{a} - hb] = {value_expr}")
        self.emit(f"if {a} < m.hbreg: m._trail({a})")

    # ---- head, read mode ----------------------------------------------
    def match(self, p: Term, addr_expr: str) -> None:
        if isinstance(p, Var):
            if self.void(p):
                return
            name = self.local.get(p.name)
            if name is None:
                name = self.local[p.name] = self.fresh("v")
                self.emit(f"{name} = {addr_expr}")
            else:
                self.unify_local(name, addr_expr)
            return
        if isinstance(p, (Atom, Int)):
            k = self.const(p)
            a, c = self.deref(addr_expr)
            self.emit(f"if {c} != {k}:")
            self.depth += 1
            self.emit(f"if {c} & 7: return False")
            self.bind(a, str(k))
            self.depth -= 1
            return
        fun = (self.program.functor(p.name, len(p.args)) << 3) | FUN
        a, c = self.deref(addr_expr)
        f = self.fresh("f")
        self.emit(f"if {c} & 7 == {STR}:")
        self.depth += 1
        self.emit(f"{f} = {c} >> 3")
        self.emit(f"if heap[{f} - hb] != {fun}: return False")
        saved = dict(self.local)
        for j, arg in enumerate(p.args, 1):
            self.match(arg, f"{f} + {j}")
        after_read = self.local
        self.depth -= 1
        self.emit(f"elif not {c} & 7:")
        self.depth += 1
        self.local = saved
        cell = self.build(p)
        self.bind(a, cell)
        if set(self.local) != set(after_read):
            raise AssertionError("read and write mode bound different variables")
        # both branches must leave each variable in the same Python local
        for name, loc in after_read.items():
            if self.local[name] != loc:
                self.emit(f"{loc} = {self.local[name]}")
        self.local = after_read
        self.depth -= 1
        self.emit("else: return False")

    # ---- write mode -------------------------------------------------------
    def build(self, p: Struct) -> str:
        """Emit code laying out `p` at h (advancing h); returns the STR cell expression."""
        blk = self.fresh("b")
        size = _size(p)
        self.emit(f"{blk} = h")
        self.emit(f"h += {size}")
        layout: list[tuple[int, Term]] = []
        next_free = [0]

        def place(t: Struct) -> int:
            off = next_free[0]
            next_free[0] += 1 + len(t.args)
            layout.append((off, t))
            return off

        place(p)
        i = 0
        while i < len(layout):
            off, t = layout[i]
            i += 1
            fun = (self.program.functor(t.name, len(t.args)) << 3) | FUN
            self.emit(f"heap[{blk} + {off}] = {fun}")
            for j, arg in enumerate(t.args, 1):
                slot = f"{blk} + {off + j}"
                if isinstance(arg, Var):
                    loc = None if self.void(arg) else self.local.get(arg.name)
                    if loc is None:
                        if self.void(arg):
                            self.emit(f"heap[{slot}] = (hb + {slot}) << 3")
                        else:
                            loc = self.local[arg.name] = self.fresh("v")
                            self.emit(f"{loc} = hb + {slot}")
                            self.emit(f"heap[{slot}] = {loc} << 3")
                    else:
                        self.emit(f"heap[{slot}] = {loc} << 3")
                elif isinstance(arg, (Atom, Int)):
                    self.emit(f"heap[{slot}] = {self.const(arg)}")
                else:
                    sub = place(arg)
                    self.emit(f"heap[{slot}] = ((hb + {blk} + {sub}) << 3) | {STR}")
        return f"((hb + {blk}) << 3) | {STR}"

    # ---- inline arithmetic guards -------------------------------------
    def guard_ok(self, g: Term) -> bool:
        if not isinstance(g, Struct) or len(g.args) != 2:
            return False
        if g.name != "is" and g.name not in _COMPARE:
            return False
        if not self.arith_ok(g.args[1]):
            return False
        if g.name == "is":
            lhs = g.args[0]
            return isinstance(lhs, Var) and lhs.name not in self.value
        return self.arith_ok(g.args[0])

    def arith_ok(self, t: Term) -> bool:
        if isinstance(t, Var):
            return t.name in self.local or t.name in self.value
        if isinstance(t, Int):
            return True
        if isinstance(t, Struct):
            return (t.name, len(t.args)) in _ARITH and all(self.arith_ok(a) for a in t.args)
        return False

    def expr(self, t: Term) -> str:
        if isinstance(t, Int):
            return f"({t.value})"
        if isinstance(t, Var):
            if t.name in self.value:
                return f"({self.value[t.name]} >> 3)"
            if t.name in self.ints:
                return self.ints[t.name]
            a, c = self.deref(self.local[t.name])
            x = self.ints[t.name] = self.fresh("x")
            self.emit(f"{x} = {c} >> 3 if {c} & 7 == {INT} else m.eval_arith({a})")
            return x
        key = (t.name, len(t.args))
        r = self.fresh("r")
        if key == ("-", 1):
            inner = self.expr(t.args[0])
            self.emit(f"{r} = -{inner}")
        else:
            x = self.expr(t.args[0])
            y = self.expr(t.args[1])
            self.emit(f"{r} = {_ARITH[key].format(x=x, y=y)}")
        if key in _CHECKED or key == ("-", 1):
            self.emit(f"if not {I64_MIN} <= {r} <= {I64_MAX}: ck({r})")
        return r

    def guard(self, g: Struct) -> None:
        self.emit("m.calls += 1")
        if g.name == "is":
            v = self.expr(g.args[1])
            lhs = g.args[0]
            cellv = self.fresh("iv")
            self.emit(f"{cellv} = (ci({v}) << 3) | {INT}")
            if lhs.name in self.local:
                self.ints.pop(lhs.name, None)
                a, c = self.deref(self.local[lhs.name])
                self.emit(f"if {c} != {cellv}:")
                self.depth += 1
                self.emit(f"if {c} & 7: return False")
                self.bind(a, cellv)
                self.depth -= 1
            elif self.counts[lhs.name] > 1:
                self.value[lhs.name] = cellv
            return
        x = self.expr(g.args[0])
        y = self.expr(g.args[1])
        self.emit(f"if not {x} {_COMPARE[g.name]} {y}: return False")

    # ---- body -----------------------------------------------------------
    def body(self, goals: list) -> tuple[array, list]:
        """Emit body construction; returns the constant cell array it copies."""
        nbody = len(goals)
        cells = [0] * (nbody + 1)
        internal: list[int] = []
        patches: list[tuple[int, str]] = []
        firstpos: dict[str, int] = {}
        work = [(g, i) for i, g in enumerate(goals)]
        work.reverse()
        while work:
            t, pos = work.pop()
            while True:
                if isinstance(t, Var):
                    loc = self.local.get(t.name)
                    if loc is not None:
                        patches.append((pos, f"{loc} << 3"))
                    elif t.name in self.value:
                        patches.append((pos, self.value[t.name]))
                    else:
                        first = firstpos.setdefault(t.name, pos)
                        cells[pos] = (first << 3) | REF
                        internal.append(pos)
                elif isinstance(t, (Atom, Int)):
                    cells[pos] = self.const(t)
                else:
                    blk = len(cells)
                    n = len(t.args)
                    cells.extend([0] * (n + 1))
                    cells[blk] = (self.program.functor(t.name, n) << 3) | FUN
                    cells[pos] = (blk << 3) | STR
                    internal.append(pos)
                    for i in range(n - 2, -1, -1):
                        work.append((t.args[i], blk + 1 + i))
                    t, pos = t.args[n - 1], blk + n
                    continue
                break
        n = len(cells)
        self.emit(f"heap[h:h + {n}] = BODY")
        self.emit("d = (hb + h) << 3")
        internal.sort()
        if len(internal) <= 24:
            for pos in internal:
                self.emit(f"heap[h + {pos}] += d")
        else:
            self.emit("for i in INTERNAL: heap[h + i] += d")
        for pos, expr in patches:
            self.emit(f"heap[h + {pos}] = {expr}")
        self.emit("nxt = goal + 1")
        self.emit("c = heap[nxt - hb]")
        self.emit(f"if c & 7 == {CONT}: nxt = c >> 3")
        self.emit(f"heap[h + {nbody}] = (nxt << 3) | {CONT}")
        self.emit(f"m.H = h + {n}")
        self.emit("m.cont = hb + h")
        return array("q", cells), internal


def compile_clause(program, head: Term, body: list):
    """Python function ``f(m, ga, goal) -> bool`` trying this clause."""
    counts = _occurrences(head, body)
    g = _Gen(program, counts)
    g.emit("heap = m.heap")
    g.emit("hb = m.hb")
    g.emit("h = m.H")
    write_max = sum(_size(a) for a in head.args) if isinstance(head, Struct) else 0
    if isinstance(head, Struct):
        for i, arg in enumerate(head.args, 1):
            g.match(arg, f"ga + {i}")
    body = list(body)
    while body and g.guard_ok(body[0]):
        g.guard(body.pop(0))
    ns: dict = {"ck": _ck, "ci": _check_int, "idiv": _intdiv, "imod": _mod}
    if body:
        body_cells, internal = g.body(body)
        ns["BODY"] = body_cells
        ns["INTERNAL"] = tuple(internal)
        need = write_max + len(body_cells)
    else:
        g.emit("m.H = h")
        g.emit("m.cont = goal + 1")
        need = write_max
    g.emit("return True")
    header = ["def clause(m, ga, goal):", f"    if m.H + {need} > m.heap_cap: m.heap_overflow()"]
    source = "\n".join(header + g.lines) + "\n"
    exec(compile(source, f"<clause {head}>", "exec"), ns)
    fn = ns["clause"]
    fn.source = source
    return fn
