"""Toppling semantics on finite graphs and tori.

A finite configuration is a chip vector over the vertices of a :class:`Graph`.
Tori are ordinary graphs built by :func:`torus_graph`, so everything here
applies to both.  Sparse configurations on the infinite lattice live in
:mod:`sandpile_tm.lattice`.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .textio import ParseError


class Outcome(str, Enum):
    STABLE = "Stable"
    BUDGET_EXHAUSTED = "BudgetExhausted"


class UnsupportedGraphError(ValueError):
    """The step cap used by the finite decider is only valid for simple undirected graphs."""


class Graph:
    """Finite directed multigraph given by out-adjacency lists.

    An undirected edge is stored as two arcs.  Self-loops count toward the
    out-degree; a chip sent along a self-loop comes straight back.
    """

    def __init__(self, out_adj: Sequence[Sequence[int]]):
        self.out_adj = [list(a) for a in out_adj]
        n = len(self.out_adj)
        for nbrs in self.out_adj:
            for w in nbrs:
                if not 0 <= w < n:
                    raise ValueError(f"arc to unknown vertex {w}")
        self.degree = np.array([len(a) for a in self.out_adj], dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.out_adj)

    @classmethod
    def undirected(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        return cls(adj)

    def is_simple_undirected(self) -> bool:
        for u, nbrs in enumerate(self.out_adj):
            if len(set(nbrs)) != len(nbrs) or u in nbrs:
                return False
            for v in nbrs:
                if u not in self.out_adj[v]:
                    return False
        return True

    def components(self) -> list[list[int]]:
        """Weakly connected components, each sorted."""
        undirected: list[set[int]] = [set() for _ in range(self.n)]
        for u, nbrs in enumerate(self.out_adj):
            for v in nbrs:
                undirected[u].add(v)
                undirected[v].add(u)
        seen = [False] * self.n
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            comp, todo = [], [s]
            while todo:
                u = todo.pop()
                comp.append(u)
                for v in undirected[u]:
                    if not seen[v]:
                        seen[v] = True
                        todo.append(v)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def num_undirected_edges(self) -> int:
        return int(self.degree.sum()) // 2

    def diameter(self) -> int:
        """Largest BFS distance between two vertices of the same component."""
        best = 0
        for s in range(self.n):
            dist = {s: 0}
            todo = deque([s])
            while todo:
                u = todo.popleft()
                for v in self.out_adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        todo.append(v)
            best = max(best, max(dist.values()))
        return best


def torus_graph(periods: Sequence[int]) -> Graph:
    """Nearest-neighbour graph on (Z/n_1) x ... x (Z/n_k), degree 2k.

    Vertices are numbered in C order of the period box.  Periods of 1 or 2
    give self-loops and parallel arcs, exactly as the wrapped lattice does.
    """
    periods = tuple(int(p) for p in periods)
    if any(p < 1 for p in periods):
        raise ValueError("periods must be >= 1")
    size = int(np.prod(periods))
    coords = np.array(np.unravel_index(np.arange(size), periods)).T
    adj = []
    for c in coords:
        nbrs = []
        for axis in range(len(periods)):
            for step in (-1, 1):
                d = c.copy()
                d[axis] = (d[axis] + step) % periods[axis]
                nbrs.append(int(np.ravel_multi_index(tuple(d), periods)))
        adj.append(nbrs)
    return Graph(adj)


@dataclass
class Configuration:
    graph: Graph
    chips: np.ndarray

    def __post_init__(self):
        self.chips = np.asarray(self.chips, dtype=np.int64)
        if self.chips.shape != (self.graph.n,):
            raise ValueError(f"expected {self.graph.n} chip counts, got shape {self.chips.shape}")

    def copy(self) -> "Configuration":
        return Configuration(self.graph, self.chips.copy())

    def total(self) -> int:
        return int(self.chips.sum())

    def unstable_vertices(self) -> list[int]:
        return [int(v) for v in np.flatnonzero(self.chips >= self.graph.degree)]

    def is_stable(self) -> bool:
        return not bool(np.any(self.chips >= self.graph.degree))

    def _check(self, v: int) -> None:
        if not 0 <= v < self.graph.n:
            raise IndexError(f"vertex {v} not in graph of {self.graph.n} vertices")


@dataclass
class Odometer:
    counts: np.ndarray
    budget_exhausted: bool = False

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class StabilizeResult:
    config: Configuration
    odometer: Odometer
    outcome: Outcome
    sequence: list[int] = field(default_factory=list)


def is_unstable(config: Configuration, v: int) -> bool:
    config._check(v)
    return bool(config.chips[v] >= config.graph.degree[v])


def topple(config: Configuration, v: int) -> Configuration:
    """Topple ``v`` whether or not it is unstable; returns a new configuration."""
    config._check(v)
    out = config.copy()
    out.chips[v] -= config.graph.degree[v]
    for w in config.graph.out_adj[v]:
        out.chips[w] += 1
    return out


def stabilize(
    config: Configuration,
    budget: int,
    *,
    rng: random.Random | None = None,
    record: bool = False,
) -> StabilizeResult:
    """Topple unstable vertices until none is left or ``budget`` topplings were made.

    Without ``rng`` the worklist is FIFO.  With ``rng`` the next vertex is
    drawn uniformly from the current worklist, which is still complete since
    every listed vertex is eventually drawn.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    g = config.graph
    # plain lists: element access on numpy arrays dominates the loop otherwise
    chips = [int(c) for c in config.chips]
    deg = [int(d) for d in g.degree]
    adj = g.out_adj
    odo = [0] * g.n
    seq: list[int] = []
    work = deque(v for v in range(g.n) if chips[v] >= deg[v])
    queued = [False] * g.n
    for v in work:
        queued[v] = True
    pool = list(work) if rng is not None else None
    done = 0
    while (pool if rng is not None else work) and done < budget:
        if rng is None:
            v = work.popleft()
        else:
            i = rng.randrange(len(pool))
            pool[i], pool[-1] = pool[-1], pool[i]
            v = pool.pop()
        queued[v] = False
        if chips[v] < deg[v]:
            continue
        chips[v] -= deg[v]
        odo[v] += 1
        done += 1
        if record:
            seq.append(v)
        for w in adj[v]:
            chips[w] += 1
        for w in (v, *adj[v]):
            if not queued[w] and chips[w] >= deg[w]:
                queued[w] = True
                if rng is None:
                    work.append(w)
                else:
                    pool.append(w)
    chips = np.array(chips, dtype=config.chips.dtype)
    odo = np.array(odo, dtype=np.int64)
    final = Configuration(g, chips)
    stable = final.is_stable()
    outcome = Outcome.STABLE if stable else Outcome.BUDGET_EXHAUSTED
    return StabilizeResult(final, Odometer(odo, not stable), outcome, seq)


def run_sequence(config: Configuration, seq: Iterable[int]) -> tuple[Configuration, bool]:
    """Apply topplings in order; ``legal`` is False if any toppled vertex was stable."""
    g = config.graph
    chips = config.chips.copy()
    legal = True
    for v in seq:
        config._check(v)
        if chips[v] < g.degree[v]:
            legal = False
        chips[v] -= g.degree[v]
        for w in g.out_adj[v]:
            chips[w] += 1
    return Configuration(g, chips), legal


def tardos_cap(graph: Graph) -> int:
    """2 n m d for the input graph (exact m and d, not the worst case)."""
    return 2 * graph.n * graph.num_undirected_edges() * graph.diameter()


@dataclass
class FiniteHaltingVerdict:
    halts: bool
    odometer: Odometer | None
    cap: int


def decide_finite_halting(graph: Graph, config: Configuration) -> FiniteHaltingVerdict:
    """Decide halting on a finite simple undirected graph.

    A halting run topples at most ``2 n m d`` times, so running one toppling
    past the cap separates the two cases.
    """
    if not graph.is_simple_undirected():
        raise UnsupportedGraphError("toppling cap only holds for simple undirected graphs")
    if config.graph is not graph:
        config = Configuration(graph, config.chips)
    cap = tardos_cap(graph)
    res = stabilize(config, cap + 1)
    if res.outcome is Outcome.STABLE:
        return FiniteHaltingVerdict(True, res.odometer, cap)
    return FiniteHaltingVerdict(False, None, cap)


# ---------------------------------------------------------------- file format
#
#   vertices N
#   edge u v          (undirected, one line each)
#   chips c0 ... cN-1
#
# Lines starting with '#' are comments.


def emit_finite(config: Configuration) -> str:
    g = config.graph
    out = [f"vertices {g.n}"]
    for u, nbrs in enumerate(g.out_adj):
        for v in nbrs:
            if u < v:
                out.append(f"edge {u} {v}")
    out.append("chips " + " ".join(str(int(c)) for c in config.chips))
    return "\n".join(out) + "\n"


def parse_finite(text: str, source: str = "<graph>") -> Configuration:
    n, edges, chips = None, [], None
    for i, raw in enumerate(text.splitlines(), 1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        try:
            vals = [int(t) for t in toks[1:]]
        except ValueError:
            raise ParseError("expected integers", i, 1, source) from None
        if toks[0] == "vertices" and len(vals) == 1 and n is None:
            n = vals[0]
        elif toks[0] == "edge" and len(vals) == 2 and n is not None:
            if not all(0 <= v < n for v in vals):
                raise ParseError("edge to unknown vertex", i, 1, source)
            edges.append(tuple(vals))
        elif toks[0] == "chips" and n is not None:
            if len(vals) != n or min(vals, default=0) < 0:
                raise ParseError(f"expected {n} non-negative chip counts", i, 1, source)
            chips = vals
        else:
            raise ParseError(f"unexpected line {toks[0]!r}", i, 1, source)
    if n is None:
        raise ParseError("missing 'vertices N'", 1, 1, source)
    return Configuration(Graph.undirected(n, edges), chips if chips is not None else [0] * n)
