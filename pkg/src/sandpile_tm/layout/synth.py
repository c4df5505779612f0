"""Two-input logic for one cube, shared by every cube of the periodic circuit.

The literal construction spends one wide AND gate per rule.  Here rules
with the same result are merged into products of per-position state sets,
and each product is built from AND2/OR2 gates:

* decoders D(i, s) fire when the cube at offset i one step earlier holds s
  (a trie of AND2 gates over its bit wires);
* set detectors are OR trees over decoders, or over shorter code prefixes
  when a prefix covers only states of the set (a cube's bits are all set
  or all lazy unless the automaton malfunctions, so a prefix is enough);
* a product is an AND2 chain over the set detectors of its non-wildcard
  positions;
* the result line O_s is the OR of the products for s, and each state wire
  is the OR of the result lines whose code has the matching bit.

Wildcards stay unconnected, so a lazy neighbour still blocks any rule that
names a state at its position, exactly as in the literal circuit.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..circuit import AND, OR, Netlist, NetlistBuilder, wire_label
from .grid import CubeGrid
from .rules import WILD, RuleTable

DIODE = 2
KIND_NAMES = {AND: "AND", OR: "OR", DIODE: "DIODE"}


@dataclass(frozen=True)
class Ref:
    """Signal ``sig`` of the cube at offset (dx, dt) from the reading cube."""
    dx: int
    dt: int
    sig: int


@dataclass(frozen=True)
class CubeGate:
    kind: int
    ins: tuple[Ref, ...]
    out: int


@dataclass
class CubeLogic:
    names: list[str] = field(default_factory=list)
    gates: list[CubeGate] = field(default_factory=list)
    cells: list[tuple[int, int]] = field(default_factory=list)      # (zero, one) per bit
    links: list[tuple[int, int, int]] = field(default_factory=list)  # (sig, dx, dt)
    named: dict[str, int] = field(default_factory=dict)

    def signal(self, name: str) -> int:
        self.names.append(name)
        return len(self.names) - 1

    def gate(self, kind: int, ins, out: int | None = None, name: str = "") -> int:
        ins = tuple(i if isinstance(i, Ref) else Ref(0, 0, i) for i in ins)
        if kind == DIODE and len(ins) != 1:
            raise ValueError("a diode has one input")
        if kind != DIODE and len(ins) != 2:
            raise ValueError("gates have two inputs")
        if out is None:
            out = self.signal(name or f"g{len(self.gates)}")
        self.gates.append(CubeGate(kind, ins, out))
        return out

    @property
    def n_signals(self) -> int:
        return len(self.names)

    def drivers(self) -> dict[int, list[int]]:
        d = defaultdict(list)
        for k, g in enumerate(self.gates):
            d[g.out].append(k)
        return d

    def counts(self) -> dict[str, int]:
        c = defaultdict(int)
        for g in self.gates:
            c[KIND_NAMES[g.kind]] += 1
        return dict(c)

    def validate(self) -> None:
        d = self.drivers()
        for s, gs in d.items():
            if len(gs) > 1:
                raise ValueError(f"signal {self.names[s]} has {len(gs)} drivers")
        for g in self.gates:
            for r in g.ins:
                if not 0 <= r.sig < self.n_signals:
                    raise ValueError("gate input out of range")
                if r.dt not in (0, -1):
                    raise ValueError("a gate may read the current or the previous time step only")


def _merge_products(products: set[tuple]) -> set[tuple]:
    """Union sets position by position while all other positions agree."""
    changed = True
    while changed:
        changed = False
        k = len(next(iter(products))) if products else 0
        for p in range(k):
            groups = defaultdict(list)
            for prod in products:
                key = (prod[:p], prod[p + 1:], prod[p] is None)
                groups[key].append(prod)
            merged = set()
            for (pre, post, wild), items in groups.items():
                if wild or len(items) == 1:
                    merged.update(items)
                    continue
                union = frozenset().union(*(it[p] for it in items))
                merged.add(pre + (union,) + post)
                changed = True
            products = merged
    return products


def merged_products(table: RuleTable) -> dict[int, list[tuple]]:
    """result -> products; each product holds a frozenset or None (wildcard) per position."""
    by_result: dict[int, set[tuple]] = defaultdict(set)
    for pattern, result in table.rules:
        by_result[result].add(tuple(None if p == WILD else frozenset([p]) for p in pattern))
    out = {}
    for s, prods in sorted(by_result.items()):
        out[s] = sorted(_merge_products(prods), key=lambda pr: tuple(
            (-1,) if x is None else tuple(sorted(x)) for x in pr))
    return out


class _Builder:
    def __init__(self, table: RuleTable, logic: CubeLogic):
        self.t = table
        self.L = logic
        self.prefix: dict = {}
        self.sets: dict = {}
        self.ands: dict = {}

    def tree(self, kind: int, ins: list, out: int | None = None, name: str = ""):
        """Balanced tree of two-input gates; a single input becomes a diode when ``out`` is fixed."""
        ins = list(ins)
        if not ins:
            raise ValueError("empty tree")
        if len(ins) == 1:
            if out is None:
                return ins[0]
            return self.L.gate(DIODE, ins, out)
        while len(ins) > 2:
            nxt = [self.L.gate(kind, ins[j:j + 2]) for j in range(0, len(ins) - 1, 2)]
            if len(ins) % 2:
                nxt.append(ins[-1])
            ins = nxt
        return self.L.gate(kind, ins, out, name)

    def bit(self, dx: int, dt: int, m: int, v: int) -> Ref:
        return Ref(dx, dt, self.L.cells[m][v])

    def decoder(self, dx: int, dt: int, s: int):
        return self.decoder_prefix(dx, dt, self.t.code(s))

    def decoder_prefix(self, dx, dt, code):
        key = (dx, dt, code)
        if key in self.prefix:
            return self.prefix[key]
        if len(code) == 1:
            out = self.bit(dx, dt, 0, code[0])
        else:
            head = self.decoder_prefix(dx, dt, code[:-1])
            out = self.L.gate(AND, [head, self.bit(dx, dt, len(code) - 1, code[-1])])
        self.prefix[key] = out
        return out

    def cover(self, states: frozenset) -> list[tuple[int, ...]]:
        """Fewest code prefixes whose valid codes are exactly ``states``."""
        n, b = self.t.n_states, self.t.bits
        codes = {self.t.code(s) for s in states}

        def walk(p):
            under = [self.t.code(s) for s in range(n) if self.t.code(s)[:len(p)] == p]
            if not under:
                return []
            if p and all(c in codes for c in under):
                return [p]
            if len(p) == b:
                return []
            return walk(p + (0,)) + walk(p + (1,))

        return walk(())

    def set_detector(self, dx: int, dt: int, states: frozenset):
        key = (dx, dt, states)
        if key not in self.sets:
            lines = [self.decoder_prefix(dx, dt, p) for p in self.cover(states)]
            self.sets[key] = self.tree(OR, lines)
        return self.sets[key]

    def product(self, prod: tuple):
        r = self.t.radius
        terms = [(i - r, st) for i, st in enumerate(prod) if st is not None]
        acc = None
        key: tuple = ()
        for dx, st in terms:
            key = key + ((dx, st),)
            if key in self.ands:
                acc = self.ands[key]
                continue
            sd = self.set_detector(dx, -1, st)
            acc = sd if acc is None else self.L.gate(AND, [acc, sd])
            self.ands[key] = acc
        return acc


def synthesize(table: RuleTable, *, init_chains: bool = False, alarm_states=None) -> CubeLogic:
    """Cube logic for ``table``.

    ``init_chains`` adds the rightward and leftward diode chains whose taps
    write the background state; ``alarm_states`` (a possibly empty sequence)
    adds an alarm wire fed by decoders of the cube's own state and joined to
    the neighbouring cubes.
    """
    L = CubeLogic()
    b = table.bits
    for m in range(b):
        L.cells.append((L.signal(f"w{m}_0"), L.signal(f"w{m}_1")))
    B = _Builder(table, L)
    extra: dict[tuple[int, int], list] = defaultdict(list)
    if init_chains:
        if table.background is None:
            raise ValueError("init chains need a background state")
        rc = L.signal("rchain")
        lc = L.signal("lchain")
        L.gate(DIODE, [Ref(-1, 0, rc)], rc)
        L.gate(DIODE, [Ref(1, 0, lc)], lc)
        tap = L.gate(OR, [rc, lc], name="blank")
        L.named.update(rchain=rc, lchain=lc, blank=tap)
        for m, v in enumerate(table.code(table.background)):
            extra[(m, v)].append(tap)
    result_lines = {}
    for s, prods in merged_products(table).items():
        outs = [B.product(p) for p in prods]
        result_lines[s] = B.tree(OR, outs) if len(outs) > 1 else outs[0]
    for m in range(b):
        for v in (0, 1):
            ins = [line for s, line in result_lines.items() if table.code(s)[m] == v] + extra[(m, v)]
            if ins:
                B.tree(OR, ins, L.cells[m][v])
    if alarm_states is not None:
        alarm = L.signal("alarm")
        L.named["alarm"] = alarm
        if alarm_states:
            B.tree(OR, [B.decoder(0, 0, s) for s in alarm_states], alarm)
        L.links += [(alarm, 1, 0), (alarm, 0, 1)]
    for k, v in list(L.named.items()):
        L.names[v] = k
    L.validate()
    return L


def netlist_logic(net: Netlist) -> CubeLogic:
    """A plain netlist as logic of a single cube that reads no other cube.

    Every wire keeps its label as a signal.  Gates with more than two inputs
    become trees, a gate's extra outputs are fed through diodes, and a wire
    with several drivers is the OR of them.
    """
    L = CubeLogic()
    for w in range(net.n_wires):
        L.signal(wire_label(net, w))
    B = _Builder(None, L)
    feeds: dict[int, list[int]] = defaultdict(list)
    n_drivers = np.bincount(net.outs, minlength=net.n_wires)
    for g in range(net.n_gates):
        kind = int(net.kind[g])
        ins = [int(w) for w in net.gate_inputs(g)]
        outs = [int(w) for w in net.gate_outputs(g)]
        if len(outs) == 1 and n_drivers[outs[0]] == 1:
            B.tree(kind, ins, outs[0])
            continue
        sig = B.tree(kind, ins) if len(ins) > 1 else L.gate(DIODE, ins)
        for o in outs:
            feeds[o].append(sig)
    for w, srcs in feeds.items():
        B.tree(OR, srcs, w)
    L.cells = [(int(z), int(o)) for z, o in net.cells]
    L.validate()
    return L


# ---------------------------------------------------------------- window netlist


@dataclass
class WindowNetlist:
    net: Netlist
    logic: CubeLogic
    x_lo: int
    x_hi: int
    t_hi: int
    wire_of: np.ndarray       # (t, x, sig) -> wire id

    def wire(self, x: int, t: int, sig: int) -> int:
        return int(self.wire_of[t, x - self.x_lo, sig])


def expand(logic: CubeLogic, x_lo: int, x_hi: int, t_hi: int, fires=()) -> WindowNetlist:
    """Instantiate the cube logic over a finite window.

    Gates reading a cube outside the window are dropped: nothing there ever
    fires.  Linked signals share one wire.  ``fires`` lists (x, t, sig)
    triples toppled at the start.
    """
    W, T, S = x_hi - x_lo + 1, t_hi + 1, logic.n_signals
    parent = np.arange(W * T * S)

    def idx(x, t, s):
        return ((t * W) + (x - x_lo)) * S + s

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for t in range(T):
        for x in range(x_lo, x_hi + 1):
            for sig, dx, dt in logic.links:
                if x_lo <= x + dx <= x_hi and 0 <= t + dt < T:
                    a, c = find(idx(x, t, sig)), find(idx(x + dx, t + dt, sig))
                    parent[max(a, c)] = min(a, c)
    roots = np.array([find(i) for i in range(W * T * S)])
    uniq, wire = np.unique(roots, return_inverse=True)
    wire_of = wire.reshape(T, W, S)
    b = NetlistBuilder()
    b.wires(len(uniq))
    for t in range(T):
        for x in range(x_lo, x_hi + 1):
            for g in logic.gates:
                ins = []
                for r in g.ins:
                    xx, tt = x + r.dx, t + r.dt
                    if not (x_lo <= xx <= x_hi and 0 <= tt < T):
                        break
                    ins.append(int(wire_of[tt, xx - x_lo, r.sig]))
                else:
                    b.gate(OR if g.kind == DIODE else g.kind, ins, [int(wire_of[t, x - x_lo, g.out])])
            for m, (z, o) in enumerate(logic.cells):
                b.cell(int(wire_of[t, x - x_lo, z]), int(wire_of[t, x - x_lo, o]), f"x{x}t{t}b{m}")
    for x, t, sig in fires:
        b.fire_initially(int(wire_of[t, x - x_lo, sig]))
    return WindowNetlist(b.build(), logic, x_lo, x_hi, t_hi, wire_of)
