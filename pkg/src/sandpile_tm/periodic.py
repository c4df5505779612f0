"""Periodic backgrounds, periodic+finite configurations and the torus decider."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .core import Configuration, Outcome, torus_graph
from .lattice import LatticeSim, Site
from .textio import ParseError


class UnstableBackgroundError(ValueError):
    pass


@dataclass
class PeriodicBackground:
    pattern: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pattern, dtype=np.int64)
        if p.ndim != 3 or min(p.shape) < 1:
            raise ValueError("pattern must be a non-empty 3-d array")
        if np.any(p < 0):
            raise ValueError("pattern entries must be >= 0")
        self.pattern = p

    @property
    def periods(self) -> tuple[int, int, int]:
        return tuple(int(s) for s in self.pattern.shape)

    @classmethod
    def constant(cls, value: int, periods=(1, 1, 1)) -> "PeriodicBackground":
        return cls(np.full(periods, value, dtype=np.int64))

    def chips(self, site: Site) -> int:
        nx, ny, nz = self.periods
        x, y, z = site
        return int(self.pattern[x % nx, y % ny, z % nz])

    def is_stable(self) -> bool:
        return bool(np.all(self.pattern <= 5))


@dataclass
class PFConfiguration:
    background: PeriodicBackground
    delta: dict[Site, int] = field(default_factory=dict)

    def __post_init__(self):
        for site, k in self.delta.items():
            if k < 1:
                raise ValueError(f"delta at {site} must add at least one chip")

    def chips(self, site: Site) -> int:
        return self.background.chips(site) + self.delta.get(site, 0)


@dataclass
class TorusState:
    config: Configuration
    periods: tuple[int, int, int]
    odometer: np.ndarray

    def index(self, site: Site) -> int:
        return int(np.ravel_multi_index(tuple(c % p for c, p in zip(site, self.periods)), self.periods))


def to_torus(bg: PeriodicBackground) -> TorusState:
    g = torus_graph(bg.periods)
    cfg = Configuration(g, bg.pattern.reshape(-1))
    return TorusState(cfg, bg.periods, np.zeros(g.n, dtype=np.int64))


class Answer(str, Enum):
    YES = "Y"
    NO = "N"
    CONDITIONAL = "Conditional"


@dataclass
class PeriodicVerdict:
    vertex: Answer
    global_: Answer
    local: Answer
    row: str
    steps: int
    origin_fired: bool
    loop: tuple[int, int] | None = None
    odometer_growth: int = 0
    # vertex answer as read off the table, before origin firing is consulted
    table_vertex: Answer | None = None
    # distinct torus vertices toppled between the two visits of the repeated state
    loop_vertices: int = 0

    def line(self) -> str:
        return f"{self.vertex.value} {self.global_.value} {self.local.value}"


def decide_periodic(bg: PeriodicBackground) -> PeriodicVerdict:
    """Run the torus until it is stable or revisits a state, then read the table.

    Every chip array reached after a toppling is hashed; the state space is
    finite because the torus conserves chips.
    """
    torus = to_torus(bg)
    g = torus.config.graph
    chips = torus.config.chips.copy()
    deg = g.degree
    if np.all(chips < deg):
        return PeriodicVerdict(Answer.NO, Answer.NO, Answer.NO, "stable at start", 0, False,
                               table_vertex=Answer.NO)
    seen: dict[bytes, tuple[int, int]] = {chips.tobytes(): (0, 0)}
    odo = np.zeros(g.n, dtype=np.int64)
    work = deque(int(v) for v in np.flatnonzero(chips >= deg))
    queued = np.zeros(g.n, dtype=bool)
    queued[list(work)] = True
    steps = 0
    trace: list[int] = []
    while work:
        v = work.popleft()
        queued[v] = False
        if chips[v] < deg[v]:
            continue
        chips[v] -= deg[v]
        odo[v] += 1
        steps += 1
        trace.append(v)
        for w in g.out_adj[v]:
            chips[w] += 1
        for w in (v, *g.out_adj[v]):
            if not queued[w] and chips[w] >= deg[w]:
                queued[w] = True
                work.append(w)
        key = chips.tobytes()
        total = int(odo.sum())
        if key in seen:
            first, first_total = seen[key]
            # a loop on a connected torus topples every vertex, the origin included
            return PeriodicVerdict(Answer.YES, Answer.YES, Answer.YES, "unstable and loops", steps,
                                   True, (first, steps), total - first_total, Answer.YES,
                                   len(set(trace[first:])))
        seen[key] = (steps, total)
    fired = bool(odo[0] > 0)
    vertex = Answer.YES if fired else Answer.NO
    return PeriodicVerdict(vertex, Answer.YES, Answer.NO, "unstable but stabilizes", steps, fired,
                           table_vertex=Answer.CONDITIONAL)


class PFResult(NamedTuple):
    odometer: dict[Site, int]
    outcome: Outcome
    origin_topplings: int
    topplings: int


def pf_simulate(cfg: PFConfiguration, budget: int,
                window: tuple[Site, Site] | None = None) -> PFResult:
    """Sparse simulation of a p+f configuration with a stable background."""
    if not cfg.background.is_stable():
        raise UnstableBackgroundError(
            "background has an unstable site, so every copy of it topples at once; "
            "use decide_periodic instead")
    sim = LatticeSim(cfg.background.pattern, cfg.delta, window=window)
    res = sim.run(budget)
    return PFResult(res.odometer, res.outcome, res.odometer.get((0, 0, 0), 0), res.topplings)


# ---------------------------------------------------------------- file format
#
#   periods NX NY NZ
#   pattern
#   <NX*NY lines of NZ integers, x outer, y inner>
#   delta
#   x y z +k
#
# Lines starting with '#' are comments.  emit() writes the canonical form,
# and parse(emit(c)) == c, emit(parse(t)) == t for canonical t.


def emit_pf(cfg: PFConfiguration | PeriodicBackground) -> str:
    if isinstance(cfg, PeriodicBackground):
        cfg = PFConfiguration(cfg)
    p = cfg.background.pattern
    nx, ny, nz = p.shape
    out = [f"periods {nx} {ny} {nz}", "pattern"]
    for x in range(nx):
        for y in range(ny):
            out.append(" ".join(str(int(v)) for v in p[x, y]))
    out.append("delta")
    for (x, y, z), k in sorted(cfg.delta.items()):
        out.append(f"{x} {y} {z} +{k}")
    return "\n".join(out) + "\n"


def parse_pf(text: str, source: str = "<pf>") -> PFConfiguration:
    lines = [(i, ln.rstrip("\n")) for i, ln in enumerate(text.splitlines(), 1)]
    lines = [(i, ln) for i, ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError("empty document", 1, 1, source)
    pos = 0

    def ints(i, ln, n=None):
        out = []
        col = 1
        for tok in ln.split():
            col = ln.index(tok, col - 1) + 1
            try:
                out.append(int(tok))
            except ValueError:
                raise ParseError(f"expected integer, got {tok!r}", i, col, source) from None
            col += len(tok)
        if n is not None and len(out) != n:
            raise ParseError(f"expected {n} integers, got {len(out)}", i, 1, source)
        return out

    i, ln = lines[pos]
    head = ln.split()
    if not head or head[0] != "periods":
        raise ParseError("expected 'periods NX NY NZ'", i, 1, source)
    periods = ints(i, ln[len("periods"):].rjust(len(ln)), 3)
    if min(periods) < 1:
        raise ParseError("periods must be >= 1", i, 1, source)
    pos += 1
    if pos >= len(lines) or lines[pos][1].strip() != "pattern":
        raise ParseError("expected 'pattern'", lines[min(pos, len(lines) - 1)][0], 1, source)
    pos += 1
    nx, ny, nz = periods
    pat = np.zeros(periods, dtype=np.int64)
    for x in range(nx):
        for y in range(ny):
            if pos >= len(lines):
                raise ParseError("pattern ended early", lines[-1][0], 1, source)
            i, ln = lines[pos]
            row = ints(i, ln, nz)
            if any(v < 0 for v in row):
                raise ParseError("negative chip count", i, 1, source)
            pat[x, y] = row
            pos += 1
    delta: dict[Site, int] = {}
    if pos < len(lines):
        i, ln = lines[pos]
        if ln.strip() != "delta":
            raise ParseError("expected 'delta'", i, 1, source)
        pos += 1
        for i, ln in lines[pos:]:
            toks = ln.split()
            if len(toks) != 4 or not toks[3].startswith("+"):
                raise ParseError("expected 'x y z +k'", i, 1, source)
            x, y, z = ints(i, " ".join(toks[:3]), 3)
            try:
                k = int(toks[3][1:])
            except ValueError:
                raise ParseError("bad chip increment", i, ln.index(toks[3]) + 1, source) from None
            if k < 1:
                raise ParseError("increment must be positive", i, ln.index(toks[3]) + 1, source)
            if (x, y, z) in delta:
                raise ParseError(f"duplicate delta site {(x, y, z)}", i, 1, source)
            delta[(x, y, z)] = k
    return PFConfiguration(PeriodicBackground(pat), delta)
