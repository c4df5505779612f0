"""A two-message abelian network on Z^2 in which wires can cross.

Normal nodes hold one counter and fire at 4, sending a chip to each
neighbour.  Crossover nodes hold a vertical and a horizontal counter:
chips arriving from the north or south go to the vertical counter, chips
arriving from the east or west to the horizontal one.  A counter that
reaches 2 fires its own pair of directions and nothing else.

States are finite deviations from a periodic tile of normal nodes.  An
optional window confines firing; chips may land outside it and stay there.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import Outcome
from .textio import ParseError

Pos = tuple[int, int]

NORMAL, VERTICAL, HORIZONTAL = "n", "v", "h"
THRESHOLD = {NORMAL: 4, VERTICAL: 2, HORIZONTAL: 2}
_SENDS = {
    NORMAL: ((1, 0), (-1, 0), (0, 1), (0, -1)),
    VERTICAL: ((0, 1), (0, -1)),
    HORIZONTAL: ((1, 0), (-1, 0)),
}


@dataclass
class Node2D:
    """One node: ``a`` is the counter of a normal node, or (a, b) = (vertical, horizontal).

    Counters only go negative through an illegal firing.
    """
    crossover: bool
    a: int
    b: int = 0

    def __post_init__(self):
        if not self.crossover and self.b:
            raise ValueError("a normal node has a single counter")

    def channels(self) -> tuple[str, ...]:
        return (VERTICAL, HORIZONTAL) if self.crossover else (NORMAL,)

    def count(self, ch: str) -> int:
        return self.b if ch == HORIZONTAL else self.a


@dataclass
class NetworkState:
    background: np.ndarray = field(default_factory=lambda: np.zeros((1, 1), dtype=np.int64))   # [y, x] tile
    nodes: dict[Pos, Node2D] = field(default_factory=dict)
    window: tuple[Pos, Pos] | None = None

    def __post_init__(self):
        self.background = np.atleast_2d(np.asarray(self.background, dtype=np.int64))
        if (self.background < 0).any():
            raise ValueError("background counters are non-negative")

    def copy(self) -> "NetworkState":
        nodes = {p: Node2D(n.crossover, n.a, n.b) for p, n in self.nodes.items()}
        return NetworkState(self.background.copy(), nodes, self.window)

    def node(self, p: Pos) -> Node2D:
        n = self.nodes.get(p)
        if n is None:
            py, px = self.background.shape
            n = Node2D(False, int(self.background[p[1] % py, p[0] % px]))
        return n

    def set(self, p: Pos, node: Node2D) -> None:
        if node.a < 0 or node.b < 0:
            raise ValueError("counters are non-negative")
        self.nodes[p] = node

    def add(self, p: Pos, k: int = 1, ch: str = NORMAL) -> None:
        """Drop ``k`` chips at ``p``; on a crossover ``ch`` picks the counter."""
        n = self.node(p)
        if n.crossover and ch == NORMAL:
            raise ValueError("say which counter of a crossover receives the chips")
        if ch == HORIZONTAL:
            n.b += k
        else:
            n.a += k
        self.nodes[p] = n

    def inside(self, p: Pos) -> bool:
        if self.window is None:
            return True
        (x0, y0), (x1, y1) = self.window
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    def ready(self, p: Pos) -> list[str]:
        """Channels of ``p`` at or above threshold."""
        if not self.inside(p):
            return []
        n = self.node(p)
        return [ch for ch in n.channels() if n.count(ch) >= THRESHOLD[ch]]

    def grid(self, xs: range, ys: range) -> list[list[str]]:
        """Tokens with the top row at the largest y: counter, or horizontal/vertical on crossovers.

        An empty node that was never touched is ".", as in the figures.
        """
        return [[self._token((x, y)) for x in xs] for y in reversed(ys)]

    def _token(self, p: Pos) -> str:
        n = self.node(p)
        if n.crossover:
            return f"{n.b}/{n.a}"
        return "." if n.a == 0 and p not in self.nodes else str(n.a)


def _deliver(state: NetworkState, p: Pos, d: Pos) -> None:
    q = (p[0] + d[0], p[1] + d[1])
    n = state.node(q)
    if n.crossover and d[0] != 0:
        n.b += 1
    else:
        n.a += 1
    state.nodes[q] = n


def fire(state: NetworkState, p: Pos, ch: str = NORMAL) -> bool:
    """Fire one channel of ``p`` in place; returns False if it was below threshold."""
    n = state.node(p)
    if ch not in n.channels():
        raise ValueError(f"node {p} has no channel {ch!r}")
    legal = n.count(ch) >= THRESHOLD[ch]
    if ch == HORIZONTAL:
        n.b -= THRESHOLD[ch]
    else:
        n.a -= THRESHOLD[ch]
    state.nodes[p] = n
    for d in _SENDS[ch]:
        _deliver(state, p, d)
    return legal


def fire_sequence(state: NetworkState, seq: Iterable[tuple[Pos, str]]) -> tuple[list[NetworkState], bool]:
    """Snapshots after each firing (the input first) and whether every firing was legal."""
    cur = state.copy()
    frames, legal = [cur.copy()], True
    for p, ch in seq:
        legal &= fire(cur, p, ch)
        frames.append(cur.copy())
    return frames, legal


@dataclass
class NetResult:
    state: NetworkState
    odometer: dict[tuple[Pos, str], int]
    outcome: Outcome
    firings: int


def net_stabilize(state: NetworkState, budget: int, rng: random.Random | None = None) -> NetResult:
    """Fire ready channels until none is left or ``budget`` firings were made.

    A channel is re-checked after each of its firings, so a counter that
    piled up several pairs fires several times.  ``rng`` shuffles the order.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    cur = state.copy()
    odo: dict[tuple[Pos, str], int] = {}
    work = deque((p, ch) for p in list(cur.nodes) for ch in cur.ready(p))
    pool = list(work)
    queued = set(pool)
    done = 0
    while pool if rng is not None else work:
        if done >= budget:
            break
        if rng is None:
            item = work.popleft()
        else:
            i = rng.randrange(len(pool))
            pool[i], pool[-1] = pool[-1], pool[i]
            item = pool.pop()
        queued.discard(item)
        p, ch = item
        if ch not in cur.ready(p):
            continue
        fire(cur, p, ch)
        odo[item] = odo.get(item, 0) + 1
        done += 1
        for d in ((0, 0),) + _SENDS[ch]:
            q = (p[0] + d[0], p[1] + d[1])
            for c in cur.ready(q):
                if (q, c) not in queued:
                    queued.add((q, c))
                    (pool if rng is not None else work).append((q, c))
    left = any(cur.ready(p) for p in cur.nodes)
    return NetResult(cur, odo, Outcome.BUDGET_EXHAUSTED if left else Outcome.STABLE, done)


# ---------------------------------------------------------------- gadgets


def crossing(arm: int = 3, wire: int = 3, v: int = 1, h: int = 1) -> NetworkState:
    """A vertical and a horizontal wire through a crossover at the origin, on an empty plane."""
    s = NetworkState()
    for k in range(1, arm + 1):
        for p in ((k, 0), (-k, 0), (0, k), (0, -k)):
            s.set(p, Node2D(False, wire))
    s.set((0, 0), Node2D(True, v, h))
    return s


def diode_2d(stub: int = 3) -> tuple[NetworkState, Pos, Pos]:
    """The diode with every count lowered by two: wires of 3, a throat of 2.

    Returns the state with its input and output wire ends.
    """
    s = NetworkState()
    for x in range(1 - stub, 1):
        s.set((x, 0), Node2D(False, 3))
    s.set((1, 0), Node2D(False, 2))
    s.set((0, 1), Node2D(False, 3))
    s.set((1, 1), Node2D(False, 3))
    for x in range(2, 2 + stub):
        s.set((x, 0), Node2D(False, 3))
    return s, (1 - stub, 0), (1 + stub, 0)


# ---------------------------------------------------------------- text formats
#
# Grid: whitespace-separated tokens, top row = largest y.  "k" is a normal
# node with k chips, "h/v" a crossover with horizontal and vertical counts,
# "." a node left to the background.  CSV: x,y,kind,a,b with kind N (a = chips) or
# X (a = vertical, b = horizontal).


def parse_grid(text: str, origin: Pos = (0, 0), source: str = "<grid>") -> NetworkState:
    """Lower-left token of the grid sits at ``origin``."""
    rows = [(i, line.split()) for i, line in enumerate(text.splitlines(), 1) if line.strip()]
    s = NetworkState()
    for r, (lineno, toks) in enumerate(rows):
        y = origin[1] + len(rows) - 1 - r
        for c, tok in enumerate(toks):
            p = (origin[0] + c, y)
            try:
                if tok == ".":
                    continue          # background
                if "/" in tok:
                    hh, vv = tok.split("/")
                    s.set(p, Node2D(True, int(vv), int(hh)))
                else:
                    s.set(p, Node2D(False, int(tok)))
            except ValueError:
                raise ParseError(f"bad token {tok!r}", lineno, c + 1, source) from None
    return s


def emit_grid(state: NetworkState, xs: range, ys: range) -> str:
    return "\n".join(" ".join(row) for row in state.grid(xs, ys)) + "\n"


def write_csv(state: NetworkState) -> str:
    out = ["x,y,kind,a,b"]
    for (x, y), n in sorted(state.nodes.items()):
        out.append(f"{x},{y},{'X' if n.crossover else 'N'},{n.a},{n.b}")
    return "\n".join(out) + "\n"


def read_csv(text: str, source: str = "<csv>") -> NetworkState:
    s = NetworkState()
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip() or (i == 1 and line.startswith("x")):
            continue
        parts = [t.strip() for t in line.split(",")]
        if len(parts) != 5 or parts[2] not in ("N", "X"):
            raise ParseError("expected x,y,kind,a,b with kind N or X", i, 1, source)
        try:
            x, y, a, b = int(parts[0]), int(parts[1]), int(parts[3]), int(parts[4])
            s.set((x, y), Node2D(parts[2] == "X", a, b))
        except ValueError as e:
            raise ParseError(str(e), i, 1, source) from None
    return s
