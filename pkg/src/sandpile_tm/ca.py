"""Radius-1 cellular automata compiled from Turing machines, and decoding back."""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log2

import numpy as np

from .turing import R, TapeSnapshot, TuringMachine

State = tuple  # ("t", g) | ("h", q, g) | ("e",) | ("<",) | (">",)


def tape(g: str) -> State:
    return ("t", g)


def head(q: str, g: str) -> State:
    return ("h", q, g)


ERROR: State = ("e",)


def state_name(s: State) -> str:
    if s[0] == "t":
        return f"t({s[1]})"
    if s[0] == "h":
        return f"h({s[1]},{s[2]})"
    return {"e": "e", "<": "<|", ">": "|>"}[s[0]]


def bits_for(n: int) -> int:
    return max(1, ceil(log2(n))) if n > 1 else 1


@dataclass
class CellularAutomaton:
    states: list[State]
    table: np.ndarray           # (S, S, S) -> state index
    machine: TuringMachine
    radius: int = 1

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.states)}
        self.blank = self.index[tape(self.machine.blank)]
        self.bits = bits_for(len(self.states))

    def f(self, left: State, centre: State, right: State) -> State:
        i = self.index
        return self.states[int(self.table[i[left], i[centre], i[right]])]

    def code(self, s: State) -> tuple[int, ...]:
        """Bit string of a state, most significant bit first."""
        k = self.index[s]
        return tuple((k >> (self.bits - 1 - m)) & 1 for m in range(self.bits))


def ca_states(m: TuringMachine) -> list[State]:
    return [tape(g) for g in m.alphabet] + [head(q, g) for q in m.states for g in m.alphabet] + [ERROR]


def _f(m: TuringMachine, l: State, c: State, r: State) -> State:
    nbhd = (l, c, r)
    if any(s == ERROR for s in nbhd) or sum(s[0] == "h" for s in nbhd) >= 2:
        return ERROR
    if c[0] == "h":
        q, g = c[1], c[2]
        if q in m.finals:
            return c
        return tape(m.delta[(q, g)][1])
    g2 = c[1]
    if r[0] == "h" and r[1] not in m.finals:
        q2, _, d = m.delta[(r[1], r[2])]
        return head(q2, g2) if d != R else c
    if l[0] == "h" and l[1] not in m.finals:
        q2, _, d = m.delta[(l[1], l[2])]
        return head(q2, g2) if d == R else c
    return c


def tm_to_ca(m: TuringMachine) -> CellularAutomaton:
    states = ca_states(m)
    n = len(states)
    table = np.empty((n, n, n), dtype=np.int32)
    index = {s: i for i, s in enumerate(states)}
    for a, l in enumerate(states):
        for b, c in enumerate(states):
            for k, r in enumerate(states):
                table[a, b, k] = index[_f(m, l, c, r)]
    return CellularAutomaton(states, table, m)


@dataclass
class CARow:
    """States on [lo, lo + len(cells)); everything outside is blank tape."""
    lo: int
    cells: np.ndarray
    time: int = 0

    @property
    def hi(self) -> int:
        return self.lo + len(self.cells) - 1

    def at(self, x: int, blank: int) -> int:
        i = x - self.lo
        return int(self.cells[i]) if 0 <= i < len(self.cells) else blank

    def window(self, lo: int, hi: int, blank: int) -> np.ndarray:
        return np.array([self.at(x, blank) for x in range(lo, hi + 1)], dtype=np.int32)


def encode_snapshot(ca: CellularAutomaton, s: TapeSnapshot) -> CARow:
    xs = list(s.tape) + [s.head]
    lo, hi = min(xs), max(xs)
    cells = np.full(hi - lo + 1, ca.blank, dtype=np.int32)
    for x, g in s.tape.items():
        cells[x - lo] = ca.index[tape(g)]
    cells[s.head - lo] = ca.index[head(s.state, s.letter(s.head, ca.machine.blank))]
    return CARow(lo, cells, s.time)


def ca_step(ca: CellularAutomaton, row: CARow) -> CARow:
    padded = np.concatenate([[ca.blank] * 2, row.cells, [ca.blank] * 2]).astype(np.int32)
    new = ca.table[padded[:-2], padded[1:-1], padded[2:]]
    return CARow(row.lo - 1, new.astype(np.int32), row.time + 1)


def ca_run(ca: CellularAutomaton, row0: CARow, steps: int) -> list[CARow]:
    rows = [row0]
    for _ in range(steps):
        rows.append(ca_step(ca, rows[-1]))
    return rows


@dataclass
class Malformed:
    reason: str


def decode_ca_row(ca: CellularAutomaton, row: CARow) -> TapeSnapshot | Malformed:
    tape_map: dict[int, str] = {}
    heads = []
    for i, k in enumerate(row.cells):
        s = ca.states[int(k)]
        x = row.lo + i
        if s == ERROR:
            return Malformed(f"error state at {x}")
        if s[0] == "h":
            heads.append((x, s[1]))
            g = s[2]
        else:
            g = s[1]
        if g != ca.machine.blank:
            tape_map[x] = g
    if len(heads) != 1:
        return Malformed(f"{len(heads)} heads")
    x, q = heads[0]
    return TapeSnapshot(tape_map, x, q, q in ca.machine.finals, row.time)


def same_configuration(a: TapeSnapshot, b: TapeSnapshot) -> bool:
    """Equality of tape, head and state; time stamps are ignored."""
    return (a.tape, a.head, a.state, a.halted) == (b.tape, b.head, b.state, b.halted)
