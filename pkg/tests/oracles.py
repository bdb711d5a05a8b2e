"""Independent brute-force answers for the bundled benchmark programs.

Nothing here touches the engine: each oracle enumerates candidates with
plain Python and keeps the ones that satisfy the puzzle's definition.
Answers use the same shape as the programs' query variables, converted
to Python values (lists, ints, strings).
"""
from __future__ import annotations

import itertools

import numpy as np

COLOURS = ("red", "green", "blue", "yellow")

EUROPE = ("pt", "es", "fr", "be", "nl", "lu", "de", "ch", "it", "at")
EUROPE_BORDERS = tuple(tuple(e.split("-")) for e in (
    "pt-es es-fr fr-be fr-lu fr-de fr-ch fr-it be-nl be-lu be-de nl-de lu-de "
    "de-ch de-at ch-it ch-at it-at").split())
EUROPE_BIG = EUROPE + ("dk", "pl", "cz", "sk", "hu", "si", "hr")
EUROPE_BIG_BORDERS = EUROPE_BORDERS + tuple(tuple(e.split("-")) for e in (
    "dk-de pl-de cz-de cz-pl cz-at sk-pl sk-cz sk-at hu-at hu-sk si-it si-at "
    "si-hu hr-si hr-hu").split())


# ---- n-queens ---------------------------------------------------------------------
def queens(n: int) -> list[list[int]]:
    """Row of the queen in each column, by permutation enumeration."""
    out = []
    for perm in itertools.permutations(range(1, n + 1)):
        if len({r + c for c, r in enumerate(perm)}) == n and len({r - c for c, r in enumerate(perm)}) == n:
            out.append(list(perm))
    return out


# ---- map colouring ---------------------------------------------------------------------
def colourings_exhaustive(nodes, borders) -> list[list[str]]:
    """Every assignment of four colours, filtered by the borders (vectorised)."""
    k, n = len(COLOURS), len(nodes)
    grid = np.indices((k,) * n, dtype=np.int8).reshape(n, -1).T
    idx = {c: i for i, c in enumerate(nodes)}
    ok = np.ones(len(grid), dtype=bool)
    for a, b in borders:
        ok &= grid[:, idx[a]] != grid[:, idx[b]]
    return [[COLOURS[c] for c in row] for row in grid[ok]]


def colourings_dfs(nodes, borders, fixed=()) -> list[list[str]]:
    """Colourings by depth-first search; `fixed` pins the leading nodes."""
    nbrs = {c: set() for c in nodes}
    for a, b in borders:
        nbrs[a].add(b)
        nbrs[b].add(a)
    out, col = [], {}

    def go(i: int) -> None:
        if i == len(nodes):
            out.append([col[c] for c in nodes])
            return
        node = nodes[i]
        choices = [fixed[i]] if i < len(fixed) else COLOURS
        for c in choices:
            if all(col.get(m) != c for m in nbrs[node]):
                col[node] = c
                go(i + 1)
                del col[node]

    go(0)
    return out


def valid_colouring(nodes, borders, colours) -> bool:
    if len(colours) != len(nodes) or any(c not in COLOURS for c in colours):
        return False
    at = dict(zip(nodes, colours))
    return all(at[a] != at[b] for a, b in borders)


# ---- Hamiltonian cycles -------------------------------------------------------------
def cube_graph() -> dict[int, set[int]]:
    """The 3-cube: vertices are 3-bit words, edges flip one bit."""
    return {v: {v ^ (1 << i) for i in range(3)} for v in range(8)}


def dodecahedron_graph() -> dict[int, set[int]]:
    """Two pentagons joined through a ring of ten vertices."""
    g: dict[int, set[int]] = {v: set() for v in range(20)}

    def link(a: int, b: int) -> None:
        g[a].add(b)
        g[b].add(a)

    for i in range(5):
        link(i, (i + 1) % 5)              # outer pentagon
        link(i, 5 + 2 * i)                # spokes to the ring
        link(15 + i, 15 + (i + 1) % 5)    # inner pentagon
        link(15 + i, 6 + 2 * i)
    for j in range(10):
        link(5 + j, 5 + (j + 1) % 10)     # the ring
    return g


def hamiltonian_cycles(graph: dict[int, set[int]], start: int | None = None) -> list[list[int]]:
    """Directed Hamiltonian cycles from `start`, by exhaustive path search."""
    start = min(graph) if start is None else start
    n = len(graph)
    out = []
    path = [start]
    seen = {start}

    def go(v: int) -> None:
        if len(path) == n:
            if start in graph[v]:
                out.append(list(path))
            return
        for w in sorted(graph[v]):
            if w not in seen:
                seen.add(w)
                path.append(w)
                go(w)
                path.pop()
                seen.discard(w)

    go(start)
    return out


def is_hamiltonian_cycle(adj: dict, cycle: list) -> bool:
    if len(cycle) != len(adj) or set(cycle) != set(adj):
        return False
    return all(cycle[(i + 1) % len(cycle)] in adj[cycle[i]] for i in range(len(cycle)))


# ---- digit puzzles ------------------------------------------------------------------
def magic_squares() -> list[list[int]]:
    lines = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]
    return [list(p) for p in itertools.permutations(range(1, 10))
            if all(p[a] + p[b] + p[c] == 15 for a, b, c in lines)]


def send_more_money() -> list[list[int]]:
    """[S,E,N,D,M,O,R,Y], distinct digits, leading zeros allowed."""
    out = []
    for s, e, n, d, m, o, r, y in itertools.permutations(range(10), 8):
        if 1000 * s + 100 * e + 10 * n + d + 1000 * m + 100 * o + 10 * r + e == \
                10000 * m + 1000 * o + 100 * n + 10 * e + y:
            out.append([s, e, n, d, m, o, r, y])
    return out
