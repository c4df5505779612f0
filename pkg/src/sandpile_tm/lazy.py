"""Lazy cellular automata with partial rules, and the TM compiler with wavefronts.

States are integers indexing ``LazyAutomaton.states``; the lazy state is
``LAZY = -1`` and the wildcard in patterns is ``WILD = -2``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .ca import State, head, state_name, tape
from .turing import L, R, TapeSnapshot, TuringMachine

LAZY = -1
WILD = -2
LEFT_FRONT: State = ("<",)
RIGHT_FRONT: State = (">",)
BUFFER = 3


@dataclass(frozen=True)
class PartialRule:
    pattern: tuple[int, ...]
    result: int

    def __post_init__(self):
        if all(p == WILD for p in self.pattern):
            raise ValueError("the all-wildcard pattern is not a legal pattern")
        if self.result < 0:
            raise ValueError("a rule must produce a state of S")


class LazyAutomaton:
    def __init__(self, states: list[State], radius: int, rules):
        self.states = list(states)
        self.index = {s: i for i, s in enumerate(self.states)}
        self.radius = radius
        self.rules = sorted(set(rules), key=lambda r: (r.pattern, r.result))
        for r in self.rules:
            if len(r.pattern) != 2 * radius + 1:
                raise ValueError("pattern length must be 2r+1")
            if any(p >= len(self.states) or p < WILD or p == LAZY for p in r.pattern):
                raise ValueError("pattern letters must be states of S or the wildcard")
        # group by wildcard mask for lookup: mask -> projected letters -> rules
        self._groups: dict[tuple[bool, ...], dict[tuple[int, ...], list[PartialRule]]] = {}
        for r in self.rules:
            mask = tuple(p != WILD for p in r.pattern)
            key = tuple(p for p in r.pattern if p != WILD)
            self._groups.setdefault(mask, defaultdict(list))[key].append(r)

    def matching(self, nbhd: tuple[int, ...]) -> list[PartialRule]:
        out = []
        for mask, table in self._groups.items():
            key = tuple(s for s, m in zip(nbhd, mask) if m)
            if LAZY in key:
                continue
            out.extend(table.get(key, ()))
        return out

    def name(self, k: int) -> str:
        if k == WILD:
            return "*"
        if k == LAZY:
            return "lambda"
        return state_name(self.states[k])

    def dump(self) -> str:
        lines = []
        for r in self.rules:
            lines.append("(" + ", ".join(self.name(p) for p in r.pattern) + f") -> {self.name(r.result)}")
        return "\n".join(lines) + "\n"


@dataclass
class LazyRow:
    """States on [lo, lo + len(cells)); everything outside is lazy."""
    lo: int
    cells: np.ndarray
    time: int = 0

    @property
    def hi(self) -> int:
        return self.lo + len(self.cells) - 1

    def at(self, x: int) -> int:
        i = x - self.lo
        return int(self.cells[i]) if 0 <= i < len(self.cells) else LAZY

    def trimmed(self) -> "LazyRow":
        nz = np.flatnonzero(self.cells != LAZY)
        if len(nz) == 0:
            return LazyRow(0, np.zeros(0, dtype=np.int32), self.time)
        return LazyRow(self.lo + int(nz[0]), self.cells[nz[0]:nz[-1] + 1].copy(), self.time)

    def all_lazy(self) -> bool:
        return bool(np.all(self.cells == LAZY))


@dataclass
class Malfunction:
    x: int
    time: int
    rules: list[PartialRule]


class MalfunctionError(RuntimeError):
    def __init__(self, m: Malfunction):
        super().__init__(f"malfunction at x={m.x}, t={m.time}: {len(m.rules)} rules match")
        self.malfunction = m


def lazy_step(a: LazyAutomaton, row: LazyRow) -> LazyRow:
    """One synchronous step; raises MalfunctionError if two rules match a site."""
    r = a.radius
    row = row.trimmed()
    if len(row.cells) == 0:
        return LazyRow(0, row.cells, row.time + 1)
    lo, hi = row.lo - r, row.hi + r
    padded = np.concatenate([[LAZY] * (2 * r), row.cells, [LAZY] * (2 * r)])
    out = np.full(hi - lo + 1, LAZY, dtype=np.int32)
    for i in range(hi - lo + 1):
        nbhd = tuple(int(v) for v in padded[i:i + 2 * r + 1])
        if all(v == LAZY for v in nbhd):
            continue
        hits = a.matching(nbhd)
        if len(hits) == 1:
            out[i] = hits[0].result
        elif len(hits) > 1:
            raise MalfunctionError(Malfunction(lo + i, row.time + 1, hits))
    return LazyRow(lo, out, row.time + 1).trimmed()


@dataclass
class LazyRun:
    rows: list[LazyRow]
    status: str               # "Running" | "Halted" | "Malfunction"
    time: int | None = None
    malfunction: Malfunction | None = None


def lazy_run(a: LazyAutomaton, row0: LazyRow, steps: int) -> LazyRun:
    rows = [row0.trimmed()]
    if rows[0].all_lazy():
        return LazyRun(rows, "Halted", 0)
    for _ in range(steps):
        try:
            nxt = lazy_step(a, rows[-1])
        except MalfunctionError as e:
            return LazyRun(rows, "Malfunction", e.malfunction.time, e.malfunction)
        rows.append(nxt)
        if nxt.all_lazy():
            return LazyRun(rows, "Halted", nxt.time)
    return LazyRun(rows, "Running")


# ---------------------------------------------------------------- TM compiler


def lazy_states(m: TuringMachine) -> list[State]:
    return [tape(g) for g in m.alphabet] + [head(q, g) for q in m.states for g in m.alphabet] + \
        [LEFT_FRONT, RIGHT_FRONT]


def tm_to_lazy_rules(m: TuringMachine, away_rules: bool = True) -> tuple[list[State], list[PartialRule]]:
    """Radius-2 partial rules simulating ``m`` between two wavefronts.

    Letters quantified over S are instantiated explicitly; ``*`` stays a
    wildcard.  Besides the printed families this adds the rules for a tape
    square whose neighbouring head moves away from it (``away_rules``);
    without them that square would go lazy on the first such move.
    """
    states = lazy_states(m)
    ix = {s: i for i, s in enumerate(states)}
    S = range(len(states))
    T = [ix[tape(g)] for g in m.alphabet]
    blank = ix[tape(m.blank)]
    lf, rf = ix[LEFT_FRONT], ix[RIGHT_FRONT]
    W = WILD
    rules: set[PartialRule] = set()

    def add(pattern, result):
        rules.add(PartialRule(tuple(pattern), result))

    # nothing within distance one is a head
    for a, b in product(S, S):
        for g1, g2, g3 in product(T, T, T):
            add((a, g1, g2, g3, b), g2)
    for (q, g), (q2, g2, d) in m.delta.items():
        h = ix[head(q, g)]
        # head leaves this square
        for a, b in product(S, S):
            for t1, t2 in product(T, T):
                add((a, t1, h, t2, b), ix[tape(g2)])
        for gam in m.alphabet:
            t1 = ix[tape(gam)]
            onto = ix[head(q2, gam)]
            for a, b, c in product(S, S, S):
                if d == L:
                    add((a, b, t1, h, c), onto)       # head on the right moves left onto us
                    if away_rules:
                        add((a, h, t1, b, c), t1)     # head on the left moves further left
                else:
                    add((a, h, t1, b, c), onto)       # head on the left moves right onto us
                    if away_rules:
                        add((a, b, t1, h, c), t1)     # head on the right moves further right
    # wavefronts
    for a in S:
        add((W, W, W, lf, a), lf)
        add((a, rf, W, W, W), rf)
    for a, b in product(S, S):
        add((W, W, lf, a, b), blank)
        add((a, b, rf, W, W), blank)
    for a, b, c in product(S, S, S):
        add((W, lf, a, b, c), blank)
        add((a, b, c, rf, W), blank)
    for a, b, c, d in product(S, S, S, S):
        add((lf, a, b, c, d), blank)
        add((a, b, c, d, rf), blank)
    return states, sorted(rules, key=lambda r: (r.pattern, r.result))


def lazy_initial_row(m: TuringMachine, s: TapeSnapshot, states: list[State] | None = None) -> LazyRow:
    """Left front, three blanks, the data on [-B, B], three blanks, right front."""
    states = states or lazy_states(m)
    ix = {st: i for i, st in enumerate(states)}
    B = max([abs(x) for x in s.tape] + [abs(s.head)])
    lo = -B - BUFFER - 1
    cells = [ix[LEFT_FRONT]] + [ix[tape(m.blank)]] * BUFFER
    for x in range(-B, B + 1):
        g = s.letter(x, m.blank)
        cells.append(ix[head(s.state, g)] if x == s.head else ix[tape(g)])
    cells += [ix[tape(m.blank)]] * BUFFER + [ix[RIGHT_FRONT]]
    return LazyRow(lo, np.array(cells, dtype=np.int32), s.time)


def tm_to_lazy(m: TuringMachine, s: TapeSnapshot, away_rules: bool = True) -> tuple[LazyAutomaton, LazyRow]:
    states, rules = tm_to_lazy_rules(m, away_rules)
    a = LazyAutomaton(states, 2, rules)
    return a, lazy_initial_row(m, s, states)


def decode_lazy_row(a: LazyAutomaton, row: LazyRow, blank: str) -> TapeSnapshot | None:
    """Tape and head between the wavefronts; None unless exactly one head and no lazy square."""
    tape_map, heads = {}, []
    inner = [(row.lo + i, int(k)) for i, k in enumerate(row.cells)]
    for x, k in inner:
        if k == LAZY:
            return None
        st = a.states[k]
        if st[0] in "<>":
            continue
        g = st[1] if st[0] == "t" else st[2]
        if st[0] == "h":
            heads.append((x, st[1]))
        if g != blank:
            tape_map[x] = g
    if len(heads) != 1:
        return None
    x, q = heads[0]
    return TapeSnapshot(tape_map, x, q, False, row.time)


def front_positions(a: LazyAutomaton, row: LazyRow) -> tuple[int | None, int | None]:
    lf, rf = a.index[LEFT_FRONT], a.index[RIGHT_FRONT]
    l = np.flatnonzero(row.cells == lf)
    r = np.flatnonzero(row.cells == rf)
    return (row.lo + int(l[0]) if len(l) == 1 else None, row.lo + int(r[0]) if len(r) == 1 else None)
