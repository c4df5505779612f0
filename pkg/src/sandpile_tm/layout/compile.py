"""Compile a Turing machine into a sandpile on Z^3 for one of three questions.

VertexPrediction
    The machine's CA in every cube, the init chains, and an alarm wire that
    fires when some cube holds a final head.  The design is translated so
    that the origin lies on the alarm wire.
GlobalHalting
    The lazy automaton in every cube with chips only on the cubes of row
    t = 0.  The sandpile stabilizes iff the lazy automaton dies out.
LocalHalting
    The VertexPrediction tile with the bomb added: 5 chips on chip-free edge
    and corner vertices of the cube grid, 4 on chip-free face vertices and 3
    on chip-free body vertices.  A wire from the alarm to the origin is then
    added regardless of spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..ca import CellularAutomaton, ca_run, encode_snapshot, head, tm_to_ca
from ..circuit import Netlist
from ..lattice import OFF, LatticeSim
from ..lazy import LAZY, LazyAutomaton, tm_to_lazy
from ..periodic import PeriodicBackground, PFConfiguration, emit_pf
from ..textio import ParseError
from ..turing import TuringMachine, emit_machine, initial_snapshot, load_machine
from .grid import CubeGrid
from .netlist import WindowTooSmall
from .route import (MAX_SIDE, WX, WZ, Layout, Rendered, RoutingError, _bfs, _decode, audit,
                    edge_sites, neighbour, node_site, place_and_route, vertex_class)
from .rules import BAD, RuleTable
from .synth import CubeLogic, WindowNetlist, expand, netlist_logic, synthesize

Site = tuple[int, int, int]

VERTEX, GLOBAL, LOCAL = "VertexPrediction", "GlobalHalting", "LocalHalting"
TARGETS = (VERTEX, GLOBAL, LOCAL)
ALIASES = {"vertex": VERTEX, "global": GLOBAL, "local": LOCAL}
BOMB = {0: 3, 1: 4, 2: 5, 3: 5}      # vertex class -> chips on a chip-free vertex


def target_name(s: str) -> str:
    t = ALIASES.get(s.lower(), s)
    if t not in TARGETS:
        raise ValueError(f"unknown target {s!r}")
    return t


@dataclass
class CompilePlan:
    target: str
    machine: TuringMachine
    tape: str = ""
    window: tuple[int, int] = (8, 8)        # (X, T): cubes x in [-X, X], t in [0, T]
    side: int = 0                           # cube side; 0 lets the router choose
    machine_path: str = ""

    def __post_init__(self):
        self.target = target_name(self.target)
        X, T = self.window
        if X < 1 or T < 0:
            raise ValueError("window needs X >= 1 and T >= 0")
        if self.side and (self.side & (self.side - 1) or not 32 <= self.side <= MAX_SIDE):
            raise ValueError(f"cube side must be a power of two in [32, {MAX_SIDE}]")


# ---------------------------------------------------------------- plan files
#
#   target VertexPrediction
#   machine machines/halter.tm     (relative to the plan file)
#   tape 111                       (optional; overrides the machine file's tape)
#   window 6 4                     (X T)
#   side auto                      (or a power of two)


def parse_plan(text: str, source: str = "<plan>", base: Path | None = None) -> CompilePlan:
    fields: dict[str, tuple[int, list[str]]] = {}
    for i, raw in enumerate(text.splitlines(), 1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        if toks[0] not in ("target", "machine", "tape", "window", "side"):
            raise ParseError(f"unknown directive {toks[0]!r}", i, 1, source)
        if toks[0] in fields:
            raise ParseError(f"duplicate {toks[0]!r} line", i, 1, source)
        fields[toks[0]] = (i, toks[1:])
    for key in ("target", "machine", "window"):
        if key not in fields:
            raise ParseError(f"missing {key!r} line", 1, 1, source)
    line, args = fields["machine"]
    path = Path(" ".join(args))
    if base is not None and not path.is_absolute():
        path = base / path
    try:
        m, tape = load_machine(path)
    except OSError as e:
        raise ParseError(f"cannot read machine file: {e}", line, 1, source) from None
    if "tape" in fields:
        tape = "".join(fields["tape"][1])
    line, args = fields["window"]
    try:
        X, T = (int(a) for a in args)
    except ValueError:
        raise ParseError("expected 'window X T'", line, 1, source) from None
    side = 0
    if "side" in fields:
        line, args = fields["side"]
        if args != ["auto"]:
            try:
                (side,) = (int(a) for a in args)
            except ValueError:
                raise ParseError("expected 'side auto' or 'side N'", line, 1, source) from None
    line = fields["target"][0]
    try:
        return CompilePlan(" ".join(fields["target"][1]), m, tape, (X, T), side, str(path))
    except ValueError as e:
        raise ParseError(str(e), line, 1, source) from None


def emit_plan(plan: CompilePlan) -> str:
    out = [f"target {plan.target}", f"machine {plan.machine_path or plan.machine.name + '.tm'}"]
    if plan.tape:
        out.append(f"tape {plan.tape}")
    out.append(f"window {plan.window[0]} {plan.window[1]}")
    out.append(f"side {plan.side or 'auto'}")
    return "\n".join(out) + "\n"


def load_plan(path: str | Path) -> CompilePlan:
    p = Path(path)
    return parse_plan(p.read_text(), str(p), p.parent)


# ---------------------------------------------------------------- cube designs


@dataclass
class CubeDesign:
    """One automaton's cube logic routed into a tile."""
    table: RuleTable
    logic: CubeLogic
    layout: Layout
    rendered: Rendered

    @property
    def n(self) -> int:
        return self.layout.n

    def local_site(self, sig: int) -> Site:
        return self.layout.signal_site(sig)


_CACHE: dict[tuple, CubeDesign] = {}


def cube_design(table: RuleTable, key: tuple, side: int = 0, **synth) -> CubeDesign:
    """Synthesize and route, memoized on ``key`` (routing is the slow part)."""
    k = key + (side, tuple(sorted(synth.items())))
    if k not in _CACHE:
        logic = synthesize(table, **synth)
        lay, r = place_and_route(logic, side or None)
        _CACHE[k] = CubeDesign(table, logic, lay, r)
    return _CACHE[k]


def _alarm_states(ca: CellularAutomaton) -> list[int]:
    m = ca.machine
    return [ca.index[head(q, g)] for q in m.states if q in m.finals for g in m.alphabet]


def machine_automaton(plan: CompilePlan):
    """(automaton, table, initial row) for the plan's target."""
    m = plan.machine
    snap = initial_snapshot(m, plan.tape)
    if plan.target == GLOBAL:
        a, row = tm_to_lazy(m, snap)
        return a, RuleTable.from_lazy(a), row
    ca = tm_to_ca(m)
    return ca, RuleTable.from_ca(ca), encode_snapshot(ca, snap)


# ---------------------------------------------------------------- placed designs


@dataclass
class PlacedDesign:
    plan: CompilePlan
    cube: CubeDesign
    grid: CubeGrid                         # the cubes whose states are reported
    config: PFConfiguration                # background tile (already shifted) and delta
    shift: Site                            # tile site that sits at the origin
    fires: list[tuple[int, int, int]]      # (x, t, sig) triggered by the delta chips
    box: tuple[tuple[int, int], tuple[int, int]] | None   # cube ranges simulated ((x0, x1), (t0, t1))
    vertex_classes: np.ndarray | None = None
    extra_delta: dict[Site, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.cube.n

    @property
    def logic(self) -> CubeLogic:
        return self.cube.logic

    def site(self, x: int, t: int, local: Site) -> Site:
        n, s = self.n, self.shift
        return (n * x + local[0] - s[0], local[1] - s[1], n * t + local[2] - s[2])

    def signal_site(self, x: int, t: int, sig: int) -> Site:
        return self.site(x, t, self.cube.local_site(sig))

    def window(self) -> tuple[Site, Site] | None:
        """Inclusive corner sites of the simulated box, or None for all of Z^3."""
        if self.box is None:
            return None
        (x0, x1), (t0, t1) = self.box
        n, s = self.n, self.shift
        return ((n * x0 - s[0], -s[1], n * t0 - s[2]), (n * (x1 + 1) - 1 - s[0], n - 1 - s[1], n * (t1 + 1) - 1 - s[2]))

    def port_map(self) -> dict[str, Site]:
        """Representative site of every driven signal in every reported cube."""
        out = {}
        for x, t in self.grid.cubes():
            for sig, name in enumerate(self.logic.names):
                if self.cube.layout.trees[sig]:
                    out[f"{name}@x{x}t{t}"] = self.signal_site(x, t, sig)
        return out

    def cell_map(self) -> dict[tuple[int, int], list[tuple[Site, Site]]]:
        return {(x, t): [(self.signal_site(x, t, z), self.signal_site(x, t, o)) for z, o in self.logic.cells]
                for x, t in self.grid.cubes()}

    def oracle(self) -> WindowNetlist:
        """The cube logic expanded over the simulated cubes, with the same triggers."""
        if self.box is None:
            raise ValueError("an unbounded design has no finite oracle; use oracle_for")
        (x0, x1), (t0, t1) = self.box
        return expand(self.logic, x0, x1, t1, [f for f in self.fires if f[1] >= 0])

    def simulate(self, budget: int, box=None) -> "DesignRun":
        """Run the sandpile; ``box`` overrides the simulated cube ranges."""
        window = self.window() if box is None else _box_window(self, box)
        sim = LatticeSim(self.config.background.pattern, self.config.delta, window=window)
        res = sim.run(budget, watch=(0, 0, 0))
        return DesignRun(self, sim, res.outcome.value, res.topplings, res.watch_step)


def _box_window(d: PlacedDesign, box) -> tuple[Site, Site]:
    old = d.box
    d.box = box
    try:
        return d.window()
    finally:
        d.box = old


@dataclass
class DesignRun:
    design: PlacedDesign
    sim: LatticeSim
    outcome: str
    topplings: int
    origin_step: int | None

    def fired(self, x: int, t: int, sig: int) -> bool:
        return self.sim.odometer_at(self.design.signal_site(x, t, sig)) > 0

    def cell_state(self, x: int, t: int) -> int:
        """Decoded state of cube (x, t): LAZY if nothing fired, BAD on conflicts."""
        bits = []
        for z, o in self.design.logic.cells:
            fz, fo = self.fired(x, t, z), self.fired(x, t, o)
            if fz and fo:
                return BAD
            bits.append(1 if fo else 0 if fz else None)
        return self.design.cube.table.decode_bits(bits)

    def rows(self, grid: CubeGrid | None = None) -> list[list[int]]:
        g = grid or self.design.grid
        return [[self.cell_state(x, t) for x in range(g.x_lo, g.x_hi + 1)] for t in range(g.t_hi + 1)]

    def origin_odometer(self) -> int:
        return self.sim.odometer_at((0, 0, 0))

    def max_odometer(self) -> int:
        return int(self.sim.odo.max()) if self.sim.count else 0

    def fired_gates(self, grid: CubeGrid | None = None) -> int:
        """Gates whose output port toppled, over the reported cubes."""
        g = grid or self.design.grid
        lay = self.design.cube.layout
        local = np.array([lay.port_site(k, "out") for k in range(len(lay.logic.gates))], dtype=np.int64)
        total = 0
        for x, t in g.cubes():
            sites = np.array([self.design.site(x, t, tuple(s)) for s in local], dtype=np.int64)
            total += int((self.sim.odometer_array(sites) > 0).sum())
        return total

    def fired_gates_anywhere(self) -> int:
        """Gates whose output port toppled, over every simulated cube."""
        lay, n = self.design.cube.layout, self.design.n
        is_out = np.zeros((n, n, n), dtype=bool)
        for k in range(len(lay.logic.gates)):
            is_out[lay.port_site(k, "out")] = True
        sim = self.sim
        keys = sim.keys[(sim.keys != -1) & (sim.odo > 0)]
        mask = (1 << 21) - 1
        xyz = np.stack([(keys >> 42) & mask, (keys >> 21) & mask, keys & mask], axis=1) - OFF
        local = (xyz + np.array(self.design.shift)) % n
        return int(is_out[local[:, 0], local[:, 1], local[:, 2]].sum())


def _extent(ca: CellularAutomaton, row, T: int) -> tuple[int, int]:
    """Squares that are not blank at some time up to T."""
    lo, hi = row.lo, row.hi
    for r in ca_run(ca, row, T):
        nz = np.flatnonzero(r.cells != ca.blank)
        if len(nz):
            lo, hi = min(lo, r.lo + int(nz[0])), max(hi, r.lo + int(nz[-1]))
    return lo, hi


def _fire_cells(table: RuleTable, logic: CubeLogic, x: int, t: int, state: int) -> list[tuple[int, int, int]]:
    return [(x, t, logic.cells[m][v]) for m, v in enumerate(table.code(state))]


def _shifted(tile: np.ndarray, shift: Site) -> np.ndarray:
    return np.roll(tile, tuple(-s for s in shift), axis=(0, 1, 2))


def compile_plan(plan: CompilePlan) -> PlacedDesign:
    auto, table, row = machine_automaton(plan)
    X, T = plan.window
    grid = CubeGrid(-X, X, T)
    if plan.target == GLOBAL:
        return _compile_global(plan, auto, table, row, grid)
    lo, hi = _extent(auto, row, T)
    if lo < -X or hi > X:
        raise WindowTooSmall(f"the machine reaches [{lo}, {hi}] by time {T}, outside [-{X}, {X}]")
    cube = cube_design(table, ("ca", emit_machine(plan.machine)), plan.side,
                       init_chains=True, alarm_states=tuple(_alarm_states(auto)))
    grid = grid.sized(cube.n)
    logic, r = cube.logic, table.radius
    ghosts = list(range(-X - r, -X)) + list(range(X + 1, X + r + 1))
    fires = []
    for x in range(row.lo, row.hi + 1):
        fires += _fire_cells(table, logic, x, 0, row.at(x, auto.blank))
    fires.append((row.hi + 1, 0, logic.named["rchain"]))
    fires.append((row.lo - 1, 0, logic.named["lchain"]))
    for t in range(1, T + 1):
        for x in ghosts:
            fires += _fire_cells(table, logic, x, t, auto.blank)
    # two spare cubes beyond the ghosts hold the far ends of their nets
    box = ((-X - r - WX[1], X + r + WX[1]), (-WZ[1], T + WZ[1]))
    alarm = logic.named["alarm"]
    tile = cube.rendered.chips
    if plan.target == VERTEX:
        shift = cube.local_site(alarm)
        background = PeriodicBackground(_shifted(tile, shift))
        classes = None
        extra = {}
    else:
        shift = (0, 0, 0)
        classes = vertex_class(cube.n)
        bombed = tile.astype(np.int64).copy()
        empty = cube.rendered.owner < 0
        for c, k in BOMB.items():
            bombed[empty & (classes == c)] = k
        background = PeriodicBackground(bombed)
        extra = _origin_wire(cube, bombed)
    d = PlacedDesign(plan, cube, grid, PFConfiguration(background, {}), shift, fires, box, classes, extra)
    d.config.delta.update(_delta(d))
    return d


def _delta(d: PlacedDesign) -> dict[Site, int]:
    out: dict[Site, int] = {}
    for x, t, sig in d.fires:
        s = d.signal_site(x, t, sig)
        out[s] = out.get(s, 0) + 1
    for s, k in d.extra_delta.items():
        out[s] = out.get(s, 0) + k
    return out


def _compile_global(plan, a: LazyAutomaton, table: RuleTable, row, grid: CubeGrid) -> PlacedDesign:
    cube = cube_design(table, ("lazy", emit_machine(plan.machine)), plan.side)
    logic = cube.logic
    fires = []
    for x in range(row.lo, row.hi + 1):
        if row.at(x) != LAZY:
            fires += _fire_cells(table, logic, x, 0, row.at(x))
    d = PlacedDesign(plan, cube, grid.sized(cube.n), PFConfiguration(PeriodicBackground(cube.rendered.chips)),
                     (0, 0, 0), fires, None)
    d.config.delta.update(_delta(d))
    return d


def _origin_wire(cube: CubeDesign, bombed: np.ndarray) -> dict[Site, int]:
    """Delta chips for a wire from the alarm of cube (0, 0) to the corner (0, 0, 0).

    The path runs on the routing lattice through free nodes into the corner
    node at (1, 1, 1) and then along the cube edges to the corner, ignoring
    the spacing rules there.  Every site on it is topped up to 5 chips.
    """
    lay = cube.layout
    g = lay.grid
    N, n = lay.N, lay.n
    alarm = cube.logic.named["alarm"]
    block = g.block.copy()
    bcls = g.bcls.copy()
    eblock = g.eblock.copy()
    idx = np.arange(N ** 3)
    c = np.stack([idx // (N * N), (idx // N) % N, idx % N])
    corner = np.all(c <= 1, axis=0)
    free = corner & (g.occ == -1)
    block[free] = False
    bcls[corner] = -1
    for node in np.flatnonzero(corner):
        for d in range(6):
            nb_ = neighbour(N, int(node), d)
            if nb_ is not None and corner[nb_[0]] and nb_[1] == 0 and nb_[2] == 0:
                eblock[node, d] = False
    src = np.array([(u, 0, 0) for u, w in lay.trees[alarm].items() if w == (0, 0) and g.branch[u]], dtype=np.int64)
    if len(src) == 0:
        raise RoutingError("the alarm has no branch point in its own cube")
    nwx, nwz = WX[1] - WX[0] + 1, WZ[1] - WZ[0] + 1
    prev, end = _bfs(N, nwx, nwz, WX[0], WZ[0], block, g.resv, eblock, g.eresv, bcls, g.occ, g.occw,
                     g.branch, alarm, src, 0, 0, 0, False)
    if end < 0:
        raise RoutingError("no path from the alarm to the origin")
    path = []
    st = end
    while st >= 0:
        path.append(_decode(N, st))
        st = prev[st]
    path.reverse()
    sites = []
    for (a, _, _), (b, _, _) in zip(path, path[1:]):
        d = next(d for d in range(6) if (neighbour(N, a, d) or (None,))[0] == b)
        sites += edge_sites(n, N, a, d)
        sites.append(node_site(N, b))
    sites += [(0, 1, 1), (0, 0, 1), (0, 0, 0)]
    out = {}
    for s in sites:
        k = 5 - int(bombed[s])
        if k > 0:
            out[s] = k
    return out


# ---------------------------------------------------------------- plain netlists


@dataclass
class PlacedNetlist:
    """A netlist placed in one tile; copies in other tiles stay quiet."""
    net: Netlist
    logic: CubeLogic
    layout: Layout | None
    rendered: Rendered | None

    def wire_site(self, w: int) -> Site | None:
        if self.layout is None or not self.layout.trees[w] and self.layout.driver(w) is None:
            return None
        return self.layout.signal_site(w)

    def config(self) -> PFConfiguration:
        n = self.layout.n if self.layout else 1
        tile = self.rendered.chips if self.rendered else np.zeros((n, n, n), np.int64)
        delta = {}
        for w in self.net.init.tolist():
            s = self.wire_site(w)
            if s is not None:
                delta[s] = delta.get(s, 0) + 1
        return PFConfiguration(PeriodicBackground(tile.astype(np.int64)), delta)

    def simulate(self, budget: int = 10**7) -> tuple[set[int], int, str]:
        """(fired wires, max odometer, outcome) of the placed sandpile."""
        cfg = self.config()
        sim = LatticeSim(cfg.background.pattern, cfg.delta)
        res = sim.run(budget)
        # a wire touching no gadget has no site; it is fired iff it starts fired
        fired = set(self.net.init.tolist())
        for w in range(self.net.n_wires):
            s = self.wire_site(w)
            if s is not None and sim.odometer_at(s) > 0:
                fired.add(w)
        top = int(sim.odo.max()) if sim.count else 0
        return fired, top, res.outcome.value


def place_netlist(net: Netlist, side: int | None = None) -> PlacedNetlist:
    """Place and route a plain netlist (every wire kept as a net) in one tile."""
    logic = netlist_logic(net)
    if not logic.gates:
        return PlacedNetlist(net, logic, None, None)
    lay, r = place_and_route(logic, side)
    return PlacedNetlist(net, logic, lay, r)


# ---------------------------------------------------------------- the bomb


def bomb_tile(n: int) -> np.ndarray:
    """The bare 5/4/3 tile: chips by vertex class of the cube grid of side n."""
    cls = vertex_class(n)
    out = np.zeros(cls.shape, np.int64)
    for c, k in BOMB.items():
        out[cls == c] = k
    return out


@dataclass
class BombReport:
    origin_step: int | None        # toppling count when the origin first toppled
    origin_odometers: tuple[int, int]   # after ``budget`` and after twice that
    untoppled: int                 # sites of the L1 ball that never toppled
    ball: int

    @property
    def ok(self) -> bool:
        return (self.origin_step is not None and self.untoppled == 0
                and self.origin_odometers[1] > self.origin_odometers[0])


def _ball(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    g = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    return g[np.abs(g).sum(axis=1) <= radius]


def explode(sim: LatticeSim, budget: int, radius: int = 15, ball: int = 12) -> tuple[int, int, int]:
    """Restrict ``sim`` to the box of the given radius around the origin and run it
    for ``budget`` and then ``budget`` more topplings.

    Returns the origin odometer after each run and the number of sites with
    |x|+|y|+|z| <= ball that never toppled.
    """
    sim.set_window(((-radius,) * 3, (radius,) * 3))
    sim.run(budget)
    o1 = sim.odometer_at((0, 0, 0))
    sim.run(budget)
    o2 = sim.odometer_at((0, 0, 0))
    untoppled = int((sim.odometer_array(_ball(ball)) == 0).sum())
    return o1, o2, untoppled


def bomb_lemma(n: int = 4, budget: int = 20_000, radius: int = 15, ball: int = 12) -> BombReport:
    """Topple the origin of the bare bomb and watch it spread."""
    sim = LatticeSim(bomb_tile(n), {(0, 0, 0): 1}, window=((-radius,) * 3, (radius,) * 3))
    o1, o2, untoppled = explode(sim, budget, radius, ball)
    return BombReport(0 if o1 else None, (o1, o2), untoppled, len(_ball(ball)))


def local_halting_run(d: PlacedDesign, budget: int, chunk: int = 1_000_000, limit: int = 50_000_000,
                      radius: int = 15, ball: int = 12) -> BombReport:
    """Run the circuit until the origin topples, then let the bomb go off around it."""
    sim = LatticeSim(d.config.background.pattern, d.config.delta, window=d.window())
    step = None
    while sim.topplings < limit:
        res = sim.run(chunk, watch=(0, 0, 0))
        if res.watch_step is not None:
            step = res.watch_step
            break
        if res.outcome.value == "Stable":
            break
    if step is None:
        return BombReport(None, (0, 0), len(_ball(ball)), len(_ball(ball)))
    o1, o2, untoppled = explode(sim, budget, radius, ball)
    return BombReport(step, (o1, o2), untoppled, len(_ball(ball)))


# ---------------------------------------------------------------- export


def emit_port_map(d: PlacedDesign) -> str:
    lines = [f"# side {d.n}", f"# origin shift {d.shift[0]} {d.shift[1]} {d.shift[2]}"]
    for name, (x, y, z) in sorted(d.port_map().items()):
        lines.append(f"{name} {x} {y} {z}")
    return "\n".join(lines) + "\n"


def export_design(d: PlacedDesign, pf_path: str | Path) -> tuple[Path, Path]:
    """Write the PF configuration and its port-map sidecar next to it."""
    p = Path(pf_path)
    p.write_text(emit_pf(d.config))
    side = p.with_suffix(".ports")
    side.write_text(emit_port_map(d))
    return p, side


__all__ = [
    "ALIASES", "BOMB", "BombReport", "CompilePlan", "CubeDesign", "DesignRun", "GLOBAL", "LOCAL", "PlacedDesign",
    "TARGETS", "VERTEX", "audit", "bomb_lemma", "bomb_tile", "compile_plan", "explode", "cube_design", "emit_plan", "emit_port_map",
    "export_design", "load_plan", "local_halting_run", "machine_automaton", "place_netlist", "PlacedNetlist", "parse_plan", "target_name",
]
