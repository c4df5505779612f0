"""One-shot monotone circuits: netlists of AND/OR gates and their least fixpoint.

Wires are integers.  A gate may drive several wires, and several gates may
drive one wire (that wire is then the OR of its drivers).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from .textio import ParseError

AND, OR = 0, 1
_KIND = {"AND": AND, "OR": OR}
_NAME = {AND: "AND", OR: "OR"}


class CellState(str, Enum):
    ZERO = "Zero"
    ONE = "One"
    LAZY = "Lazy"
    CONFLICT = "Conflict"


class NetlistBuilder:
    def __init__(self):
        self.names: list[str | None] = []
        self.kinds: list[int] = []
        self.ins: list[list[int]] = []
        self.outs: list[list[int]] = []
        self.cells: list[tuple[int, int]] = []
        self.cell_names: list[str] = []
        self.init: list[int] = []

    @property
    def n_wires(self) -> int:
        return len(self.names)

    def wire(self, name: str | None = None) -> int:
        self.names.append(name)
        return len(self.names) - 1

    def wires(self, k: int) -> list[int]:
        start = len(self.names)
        self.names.extend([None] * k)
        return list(range(start, start + k))

    def gate(self, kind: int, ins: Sequence[int], outs: Sequence[int]) -> int:
        if not ins:
            raise ValueError("a gate needs at least one input")
        if not outs:
            raise ValueError("a gate needs at least one output")
        self.kinds.append(kind)
        self.ins.append(list(ins))
        self.outs.append(list(outs))
        return len(self.kinds) - 1

    def cell(self, zero: int, one: int, name: str | None = None) -> int:
        self.cells.append((zero, one))
        self.cell_names.append(name or f"c{len(self.cells) - 1}")
        return len(self.cells) - 1

    def fire_initially(self, w: int) -> None:
        self.init.append(w)

    def build(self) -> "Netlist":
        return Netlist.from_lists(self.n_wires, self.kinds, self.ins, self.outs, self.cells,
                                  self.init, self.names, self.cell_names)


def _csr(lists: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(lists) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(x) for x in lists])
    flat = np.fromiter((v for x in lists for v in x), dtype=np.int64, count=int(ptr[-1]))
    return ptr, flat


@dataclass
class Netlist:
    n_wires: int
    kind: np.ndarray          # per gate
    in_ptr: np.ndarray
    ins: np.ndarray
    out_ptr: np.ndarray
    outs: np.ndarray
    cells: np.ndarray         # (n_cells, 2): zero wire, one wire
    init: np.ndarray
    names: list[str | None] = field(default_factory=list)
    cell_names: list[str] = field(default_factory=list)

    @classmethod
    def from_lists(cls, n_wires, kinds, ins, outs, cells, init, names=None, cell_names=None) -> "Netlist":
        in_ptr, in_flat = _csr(ins)
        out_ptr, out_flat = _csr(outs)
        net = cls(n_wires, np.asarray(kinds, dtype=np.int8), in_ptr, in_flat, out_ptr, out_flat,
                  np.asarray(cells, dtype=np.int64).reshape(-1, 2), np.asarray(sorted(set(init)), dtype=np.int64),
                  list(names) if names is not None else [None] * n_wires,
                  list(cell_names) if cell_names is not None else [f"c{i}" for i in range(len(cells))])
        net.validate()
        return net

    @property
    def n_gates(self) -> int:
        return len(self.kind)

    def validate(self) -> None:
        for arr, what in ((self.ins, "input"), (self.outs, "output"), (self.init, "initial")):
            if len(arr) and (arr.min() < 0 or arr.max() >= self.n_wires):
                raise ValueError(f"{what} wire out of range")
        flat = self.cells.reshape(-1)
        if len(set(flat.tolist())) != len(flat):
            raise ValueError("cell wires must be distinct")

    def gate_inputs(self, g: int) -> np.ndarray:
        return self.ins[self.in_ptr[g]:self.in_ptr[g + 1]]

    def gate_outputs(self, g: int) -> np.ndarray:
        return self.outs[self.out_ptr[g]:self.out_ptr[g + 1]]

    def fanout(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR map wire -> gates reading it."""
        counts = np.bincount(self.ins, minlength=self.n_wires)
        ptr = np.zeros(self.n_wires + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(counts)
        gate_of = np.repeat(np.arange(self.n_gates, dtype=np.int64), np.diff(self.in_ptr))
        order = np.argsort(self.ins, kind="stable")
        return ptr, gate_of[order]


@nb.njit(cache=True)
def _closure(n_wires, kind, in_ptr, out_ptr, outs, f_ptr, f_gate, init):
    fired = np.zeros(n_wires, np.bool_)
    gate_fired = np.zeros(len(kind), np.bool_)
    need = np.empty(len(kind), np.int64)
    for g in range(len(kind)):
        need[g] = in_ptr[g + 1] - in_ptr[g] if kind[g] == 0 else 1
    stack = np.empty(n_wires, np.int64)
    top = 0
    for w in init:
        if not fired[w]:
            fired[w] = True
            stack[top] = w
            top += 1
    while top > 0:
        top -= 1
        w = stack[top]
        for j in range(f_ptr[w], f_ptr[w + 1]):
            g = f_gate[j]
            if gate_fired[g]:
                continue
            need[g] -= 1
            if need[g] <= 0:
                gate_fired[g] = True
                for k in range(out_ptr[g], out_ptr[g + 1]):
                    o = outs[k]
                    if not fired[o]:
                        fired[o] = True
                        stack[top] = o
                        top += 1
    return fired, gate_fired


@dataclass
class Closure:
    fired: np.ndarray         # per wire
    gate_fired: np.ndarray    # per gate

    def fired_set(self) -> set[int]:
        return set(np.flatnonzero(self.fired).tolist())


def eval_closure(net: Netlist) -> Closure:
    """Least fixpoint from the initially fired wires.

    An input listed twice on a gate is also listed twice in the fan-out,
    so the countdown stays consistent.
    """
    f_ptr, f_gate = net.fanout()
    fired, gfired = _closure(net.n_wires, net.kind, net.in_ptr, net.out_ptr, net.outs,
                             f_ptr, f_gate, net.init)
    return Closure(fired, gfired)


def eval_closure_reference(net: Netlist, rng: random.Random | None = None) -> set[int]:
    """Plain fixpoint iteration over gates in a (possibly shuffled) order."""
    fired = set(net.init.tolist())
    gates = list(range(net.n_gates))
    changed = True
    while changed:
        changed = False
        if rng is not None:
            rng.shuffle(gates)
        for g in gates:
            ins = net.gate_inputs(g).tolist()
            on = all(w in fired for w in ins) if net.kind[g] == AND else any(w in fired for w in ins)
            if on:
                for o in net.gate_outputs(g).tolist():
                    if o not in fired:
                        fired.add(o)
                        changed = True
    return fired


def read_cell(fired: np.ndarray | set[int], zero: int, one: int) -> CellState:
    z = zero in fired if isinstance(fired, set) else bool(fired[zero])
    o = one in fired if isinstance(fired, set) else bool(fired[one])
    if z and o:
        return CellState.CONFLICT
    if o:
        return CellState.ONE
    if z:
        return CellState.ZERO
    return CellState.LAZY


# ---------------------------------------------------------------- text format
#
#   WIRE id
#   AND out... <- in...
#   OR out... <- in...
#   CELL id zero one
#   INIT id
#
# Wire ids are tokens without spaces; unnamed wires are written as w<number>.


def wire_label(net: Netlist, w: int) -> str:
    return net.names[w] if net.names and net.names[w] else f"w{w}"


def emit_netlist(net: Netlist) -> str:
    lab = [wire_label(net, w) for w in range(net.n_wires)]
    out = [f"WIRE {x}" for x in lab]
    for g in range(net.n_gates):
        outs = " ".join(lab[o] for o in net.gate_outputs(g))
        ins = " ".join(lab[i] for i in net.gate_inputs(g))
        out.append(f"{_NAME[int(net.kind[g])]} {outs} <- {ins}")
    for (z, o), name in zip(net.cells.tolist(), net.cell_names):
        out.append(f"CELL {name} {lab[z]} {lab[o]}")
    for w in net.init.tolist():
        out.append(f"INIT {lab[w]}")
    return "\n".join(out) + "\n"


def parse_netlist(text: str, source: str = "<netlist>") -> Netlist:
    b = NetlistBuilder()
    ids: dict[str, int] = {}

    def ref(tok, line, col):
        if tok not in ids:
            raise ParseError(f"unknown wire {tok!r}", line, col, source)
        return ids[tok]

    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks = line.split()
        if not toks:
            continue
        col = line.index(toks[0]) + 1
        kw = toks[0]
        if kw == "WIRE":
            if len(toks) != 2:
                raise ParseError("expected 'WIRE id'", i, col, source)
            if toks[1] in ids:
                raise ParseError(f"duplicate wire {toks[1]!r}", i, col, source)
            ids[toks[1]] = b.wire(toks[1])
        elif kw in _KIND:
            if "<-" not in toks:
                raise ParseError("expected 'out... <- in...'", i, col, source)
            k = toks.index("<-")
            outs = [ref(t, i, col) for t in toks[1:k]]
            ins = [ref(t, i, col) for t in toks[k + 1:]]
            if not outs or not ins:
                raise ParseError("gate needs inputs and outputs", i, col, source)
            b.gate(_KIND[kw], ins, outs)
        elif kw == "CELL":
            if len(toks) != 4:
                raise ParseError("expected 'CELL id zero one'", i, col, source)
            b.cell(ref(toks[2], i, col), ref(toks[3], i, col), toks[1])
        elif kw == "INIT":
            if len(toks) != 2:
                raise ParseError("expected 'INIT id'", i, col, source)
            b.fire_initially(ref(toks[1], i, col))
        else:
            raise ParseError(f"unknown keyword {kw!r}", i, col, source)
    try:
        return b.build()
    except ValueError as e:
        raise ParseError(str(e), 1, 1, source) from None
