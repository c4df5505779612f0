"""Placement and routing of one cube's logic inside a periodic tile.

The tile is an n x n x n block of Z^3 repeated in every direction.  Wires
run on a coarse lattice of spacing 3 (node (i, j, k) sits at fine site
(1+3i, 1+3j, 1+3k)).  Two nets never share a coarse node, which keeps
different wires at Chebyshev distance >= 3, so no empty site ever touches
two of them.  Gates are gadgets placed in canonical orientation with their
ports on coarse nodes.

Nets that reach a neighbouring cube leave the tile through a face and come
back in through the opposite one; the router tracks the winding of every
tree node so that a net's copy in the next cube is what it connects to.

Faces are crossed only by straight wires, and nothing comes near the cube
edges, so the layout also survives the extra chips of the bomb wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from ..circuit import AND, OR
from ..gadgets import Gadget, _gate2, build_diode
from .synth import DIODE, CubeLogic

Site = tuple[int, int, int]

MAX_SIDE = 1024
WX = (-2, 2)          # winding ranges the router may use
WZ = (-1, 1)
_DIRS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


class RoutingError(RuntimeError):
    def __init__(self, msg: str, sig: int | None = None):
        super().__init__(msg)
        self.sig = sig


# ---------------------------------------------------------------- gate templates


def _two_input(centre: int, name: str) -> Gadget:
    fp = {(x + 3, y, z): c for (x, y, z), c in _gate2(centre, 4, 4, 3).items()}
    return Gadget(name, fp, {"in0": (0, 0, 0), "in1": (12, 0, 0)}, {"out": (6, -3, 0)})


def gate_templates() -> dict[int, Gadget]:
    """Gates with every port on the spacing-3 lattice, anchored at the first input."""
    return {
        AND: _two_input(4, "and2"),
        OR: _two_input(5, "or2"),
        DIODE: build_diode(3).translate((2, 0, 0)),
    }


TEMPLATES = gate_templates()
IN_PORTS = {AND: ("in0", "in1"), OR: ("in0", "in1"), DIODE: ("in",)}


def _stub(g: Gadget, port: str) -> list[Site]:
    """The straight run of plain wire from a port up to the first junction."""
    junctions = g.junctions()
    s = g.ports[port]
    out, prev = [], None
    while s not in junctions:
        out.append(s)
        nxt = [t for t in ((s[0] + d[0], s[1] + d[1], s[2] + d[2]) for d in _DIRS)
               if t in g.footprint and t != prev and t not in out]
        if len(nxt) != 1:
            break
        prev, s = s, nxt[0]
    return out


STUBS = {k: {p: _stub(g, p) for p in g.ports} for k, g in TEMPLATES.items()}


def _outward(kind: int, port: str) -> int:
    """Direction in which a port's stub leaves the gadget."""
    stub = STUBS[kind][port]
    d = tuple(x - y for x, y in zip(stub[0], stub[1]))
    return _DIRS.index(d)


OUTWARD = {k: {p: _outward(k, p) for p in g.ports} for k, g in TEMPLATES.items()}


# ---------------------------------------------------------------- coarse grid


def coarse_size(n: int) -> int:
    return (n - 3) // 3 + 1


def node_site(N: int, node: int) -> Site:
    i, j, k = node // (N * N), (node // N) % N, node % N
    return (1 + 3 * i, 1 + 3 * j, 1 + 3 * k)


def edge_sites(n: int, N: int, node: int, d: int) -> list[Site]:
    """Fine sites strictly between a node and its neighbour in direction d (tile coords)."""
    a = node_site(N, node)
    axis, sgn = d // 2, (1 if d % 2 == 0 else -1)
    idx = a[axis] // 3
    if sgn > 0:
        length = 3 if idx < N - 1 else n + 1 - a[axis]
    else:
        length = 3 if idx > 0 else a[axis] + n - (1 + 3 * (N - 1))
    out = []
    for s in range(1, length):
        b = list(a)
        b[axis] = (a[axis] + sgn * s) % n
        out.append(tuple(b))
    return out


def neighbour(N: int, node: int, d: int) -> tuple[int, int, int] | None:
    """(node, dwx, dwz) across direction d, or None off the y range."""
    c = [node // (N * N), (node // N) % N, node % N]
    axis, sgn = d // 2, (1 if d % 2 == 0 else -1)
    c[axis] += sgn
    dw = [0, 0, 0]
    if c[axis] == N:
        c[axis] = 0
        dw[axis] = 1
    elif c[axis] < 0:
        c[axis] = N - 1
        dw[axis] = -1
    if axis == 1 and dw[1]:
        return None
    return (c[0] * N + c[1]) * N + c[2], dw[0], dw[2]


@nb.njit(cache=True)
def _bfs(N, nwx, nwz, wx0, wz0, block, resv, eblock, eresv, bcls, occ, occw, branch, net,
         src, tgt_node, tgt_wx, tgt_wz, link_mode):
    NN = N * N * N
    S = nwx * nwz * NN
    prev = np.full(S, -1, np.int64)
    queue = np.empty(S, np.int64)
    qh = 0
    qt = 0
    for q in range(src.shape[0]):
        st = ((src[q, 1] - wx0) * nwz + (src[q, 2] - wz0)) * NN + src[q, 0]
        if prev[st] == -1:
            prev[st] = -2
            queue[qt] = st
            qt += 1
    while qh < qt:
        st = queue[qh]
        qh += 1
        w = st // NN
        node = st % NN
        wxi = w // nwz
        wzi = w % nwz
        i = node // (N * N)
        j = (node // N) % N
        k = node % N
        for d in range(6):
            if eblock[node, d]:
                continue
            er = eresv[node, d]
            if er != -1 and er != net:
                continue
            axis = d // 2
            sgn = 1 if d % 2 == 0 else -1
            ni = i
            nj = j
            nk = k
            nwxi = wxi
            nwzi = wzi
            if axis == 0:
                ni += sgn
                if ni == N:
                    ni = 0
                    nwxi += 1
                elif ni < 0:
                    ni = N - 1
                    nwxi -= 1
            elif axis == 1:
                nj += sgn
                if nj < 0 or nj >= N:
                    continue
            else:
                nk += sgn
                if nk == N:
                    nk = 0
                    nwzi += 1
                elif nk < 0:
                    nk = N - 1
                    nwzi -= 1
            if nwxi < 0 or nwxi >= nwx or nwzi < 0 or nwzi >= nwz:
                continue
            v = (ni * N + nj) * N + nk
            bu = bcls[node]
            bv = bcls[v]
            if (bu >= 0 and bu != axis) or (bv >= 0 and bv != axis):
                continue
            nst = (nwxi * nwz + nwzi) * NN + v
            if prev[nst] != -1:
                continue
            if link_mode:
                if occ[v] == net and branch[v] and occw[v, 0] + tgt_wx == nwxi + wx0 \
                        and occw[v, 1] + tgt_wz == nwzi + wz0:
                    prev[nst] = st
                    return prev, nst
            elif v == tgt_node and nwxi + wx0 == tgt_wx and nwzi + wz0 == tgt_wz:
                prev[nst] = st
                return prev, nst
            if block[v] or occ[v] != -1:
                continue
            r = resv[v]
            if r != -1 and r != net:
                continue
            prev[nst] = st
            queue[qt] = nst
            qt += 1
    return prev, -1


# ---------------------------------------------------------------- placement


@dataclass
class Layout:
    """A routed tile: gate anchors plus one coarse tree per signal."""
    logic: CubeLogic
    n: int
    N: int
    anchors: list[int]                                        # per gate, coarse node of its anchor
    trees: list[dict[int, tuple[int, int]]] = field(default_factory=list)   # node -> winding
    edges: list[list[tuple[int, int]]] = field(default_factory=list)         # (node, dir)
    grid: "_Grid | None" = None

    def gadget(self, g: int) -> Gadget:
        kind = self.logic.gates[g].kind
        return TEMPLATES[kind].translate(node_site(self.N, self.anchors[g]))

    def port_site(self, g: int, port: str) -> Site:
        return self.gadget(g).ports[port]

    def driver(self, sig: int) -> int | None:
        for g, gate in enumerate(self.logic.gates):
            if gate.out == sig:
                return g
        return None

    def signal_site(self, sig: int) -> Site:
        """A site of the signal's wire inside its own cube (the driver's output port)."""
        g = self.driver(sig)
        if g is not None:
            return self.port_site(g, "out")
        for node, w in self.trees[sig].items():
            if w == (0, 0):
                return node_site(self.N, node)
        raise KeyError(self.logic.names[sig])

    def wire_length(self) -> int:
        return sum(len(t) for t in self.trees)


def _slots(N: int, pitch=(7, 4, 3)) -> list[tuple[int, int, int]]:
    px, py, pz = pitch
    out = []
    for k in range(2, N - 2, pz):
        for j in range(3, N - 3, py):
            for i in range(2, N - 7, px):
                out.append((i, j, k))
    return out


def _levels(logic: CubeLogic) -> list[int]:
    drv = logic.drivers()
    memo: dict[int, int] = {}

    def level(g):
        if g in memo:
            return memo[g]
        memo[g] = 0
        lv = 0
        for r in logic.gates[g].ins:
            if r.dt == 0 and r.dx == 0 and r.sig in drv:
                lv = max(lv, level(drv[r.sig][0]) + 1)
        memo[g] = lv
        return lv

    return [level(g) for g in range(len(logic.gates))]


def _lateral(logic: CubeLogic, levels: list[int]) -> list[float]:
    """Preferred x in [-1, 1] from the offsets of the cubes a gate reads."""
    drv = logic.drivers()
    pref = [0.0] * len(logic.gates)
    for g in sorted(range(len(logic.gates)), key=lambda g: levels[g]):
        vals = []
        for r in logic.gates[g].ins:
            if r.dx != 0 or r.dt != 0:
                vals.append(max(-1.0, min(1.0, r.dx / 1.5)))
            elif r.sig in drv:
                vals.append(pref[drv[r.sig][0]])
        pref[g] = sum(vals) / len(vals) if vals else 0.0
    return pref


def place(logic: CubeLogic, n: int, pitch=(7, 4, 3)) -> list[int] | None:
    N = coarse_size(n)
    slots = _slots(N, pitch)
    G = len(logic.gates)
    if G > len(slots):
        return None
    levels = _levels(logic)
    top = max(levels, default=0) or 1
    lat = _lateral(logic, levels)
    ks = sorted({s[2] for s in slots})
    is_ = sorted({s[0] for s in slots})
    free = set(range(len(slots)))
    anchors = [0] * G
    order = sorted(range(G), key=lambda g: (levels[g], lat[g]))
    for g in order:
        zt = ks[0] + (ks[-1] - ks[0]) * levels[g] / top
        xt = is_[0] + (is_[-1] - is_[0]) * (lat[g] + 1) / 2
        best = min(free, key=lambda s: (abs(slots[s][2] - zt) * 1.0 + abs(slots[s][0] - xt) * 0.7
                                        + abs(slots[s][1] - N / 2) * 0.2, s))
        free.discard(best)
        i, j, k = slots[best]
        anchors[g] = (i * N + j) * N + k
    return anchors


# ---------------------------------------------------------------- routing


class _Grid:
    def __init__(self, logic: CubeLogic, n: int, anchors: list[int]):
        self.logic, self.n = logic, n
        N = self.N = coarse_size(n)
        NN = N ** 3
        self.block = np.zeros(NN, np.bool_)
        self.resv = np.full(NN, -1, np.int64)
        self.eblock = np.zeros((NN, 6), np.bool_)
        self.eresv = np.full((NN, 6), -1, np.int64)
        self.bcls = np.full(NN, -1, np.int64)
        self.occ = np.full(NN, -1, np.int64)
        self.occw = np.zeros((NN, 2), np.int64)
        self.branch = np.zeros(NN, np.bool_)
        idx = np.arange(NN)
        c = np.stack([idx // (N * N), (idx // N) % N, idx % N])
        bnd = (c == 0) | (c == N - 1)
        nb_ = bnd.sum(axis=0)
        self.bcls[nb_ == 1] = np.argmax(bnd[:, nb_ == 1], axis=0)
        self.block[nb_ >= 2] = True
        self.block[bnd[1]] = True             # nets never cross the y faces
        self.branch[:] = nb_ == 0
        self._fine_marks(anchors)

    def _fine_marks(self, anchors):
        """Block coarse nodes and edges near gadget sites; reserve those near port stubs."""
        n, N = self.n, self.N
        near = np.zeros((n, n, n), np.bool_)
        owner = np.full((n, n, n), -1, np.int64)
        self.port_nodes: dict[tuple[int, str], int] = {}
        sig_of_port: dict[tuple[int, str], int] = {}
        for g, gate in enumerate(self.logic.gates):
            for p, r in zip(IN_PORTS[gate.kind], gate.ins):
                sig_of_port[(g, p)] = r.sig
            sig_of_port[(g, "out")] = gate.out
        for g, a in enumerate(anchors):
            kind = self.logic.gates[g].kind
            tpl = TEMPLATES[kind]
            o = node_site(N, a)
            exempt = {}
            for p, stub in STUBS[kind].items():
                for s in stub:
                    exempt[s] = sig_of_port[(g, p)]
            for s in tpl.footprint:
                f = (s[0] + o[0], s[1] + o[1], s[2] + o[2])
                lo = [max(0, v - 2) for v in f]
                if s in exempt:
                    sl = owner[lo[0]:f[0] + 3, lo[1]:f[1] + 3, lo[2]:f[2] + 3]
                    net = exempt[s]
                    sl[(sl != -1) & (sl != net)] = -2
                    sl[sl == -1] = net
                else:
                    near[lo[0]:f[0] + 3, lo[1]:f[1] + 3, lo[2]:f[2] + 3] = True
            for p, s in tpl.ports.items():
                f = (s[0] + o[0], s[1] + o[1], s[2] + o[2])
                node = ((f[0] - 1) // 3 * N + (f[1] - 1) // 3) * N + (f[2] - 1) // 3
                self.port_nodes[(g, p)] = node
                self.block[node] = True
                self.branch[node] = False
        owner[near] = -2
        at = owner[1:3 * N:3, 1:3 * N:3, 1:3 * N:3].reshape(-1)
        self.block[at == -2] = True
        self.resv[at >= 0] = at[at >= 0]
        for (g, p), node in self.port_nodes.items():
            kind = self.logic.gates[g].kind
            v = neighbour(N, node, OUTWARD[kind][p])[0]
            r, sig = self.resv[v], sig_of_port[(g, p)]
            if r == -1 or r == sig:
                self.resv[v] = sig
            else:
                self.block[v] = True
        self._edge_marks(owner)

    def _edge_marks(self, owner):
        """An edge is blocked if its inner sites touch a gadget or two nets' stubs."""
        n, N = self.n, self.N
        idx = 1 + 3 * np.arange(N)
        for axis in range(3):
            d = 2 * axis
            length = np.full(N, 3)
            length[-1] = n + 1 - idx[-1]
            lo = np.full((N, N, N), np.iinfo(np.int64).max)
            hi = np.full((N, N, N), -3)
            for step in range(1, int(length.max())):
                pos = [idx, idx, idx]
                pos[axis] = (idx + step) % n
                vals = owner[np.ix_(*pos)].astype(np.int64)
                valid = (step < length).reshape([-1 if a == axis else 1 for a in range(3)])
                vals = np.where(valid & (vals != -1), vals, -1)
                hi = np.maximum(hi, vals)
                lo = np.where(vals != -1, np.minimum(lo, vals), lo)
            bad = (lo == -2) | ((hi >= 0) & (lo >= 0) & (lo != hi))
            res = np.where(~bad & (hi >= 0), hi, -1)
            if axis == 1:
                bad[:, -1, :] = True
            fwd = bad.reshape(-1)
            self.eblock[:, d] = fwd
            self.eresv[:, d] = res.reshape(-1)
            back = np.roll(bad, 1, axis=axis).reshape(-1)
            self.eblock[:, d + 1] = back
            self.eresv[:, d + 1] = np.roll(res, 1, axis=axis).reshape(-1)
            if axis == 1:
                self.eblock[np.arange(N ** 3).reshape(N, N, N)[:, 0, :].reshape(-1), d + 1] = True


def _decode(N, st):
    NN = N ** 3
    nwz = WZ[1] - WZ[0] + 1
    w, node = st // NN, st % NN
    return node, w // nwz + WX[0], w % nwz + WZ[0]


def _direction(N, a, b):
    for d in range(6):
        nb_ = neighbour(N, a, d)
        if nb_ is not None and nb_[0] == b:
            return d
    raise RoutingError("path nodes are not adjacent")


def _nets(logic: CubeLogic):
    """sig -> (driver (gate, 'out') or None, sinks [(gate, port, wx, wz)], links [(wx, wz)])."""
    nets = {s: [None, [], []] for s in range(logic.n_signals)}
    for g, gate in enumerate(logic.gates):
        nets[gate.out][0] = (g, "out")
        for p, r in zip(IN_PORTS[gate.kind], gate.ins):
            nets[r.sig][1].append((g, p, -r.dx, -r.dt))
    for sig, dx, dt in logic.links:
        nets[sig][2].append((dx, dt))
    return nets


def _free_node(grid: "_Grid", sig: int) -> int:
    N = grid.N
    ok = ~grid.block & (grid.occ == -1) & ((grid.resv == -1) | (grid.resv == sig)) & grid.branch
    free = np.flatnonzero(ok)
    if len(free) == 0:
        raise RoutingError("no free node")
    c = np.stack([free // (N * N), (free // N) % N, free % N]).T
    return int(free[np.argmin(np.abs(c - N // 2).sum(axis=1))])


def route(logic: CubeLogic, n: int, anchors: list[int], first: tuple[int, ...] = ()) -> Layout:
    """Route every net; ``first`` lists nets to route before all others, in order."""
    grid = _Grid(logic, n, anchors)
    N = grid.N
    lay = Layout(logic, n, N, anchors, [dict() for _ in range(logic.n_signals)],
                 [[] for _ in range(logic.n_signals)], grid)
    nets = _nets(logic)
    nwx, nwz = WX[1] - WX[0] + 1, WZ[1] - WZ[0] + 1

    def length_key(sig):
        # nets that must wrap around the tile go first, while it is empty
        drv, sinks, links = nets[sig]
        return (-len(links), -sum(abs(wx) + abs(wz) > 0 for _, _, wx, wz in sinks), len(sinks))

    rest = sorted((s for s in nets if s not in first), key=length_key)
    for sig in list(first) + rest:
        drv, sinks, links = nets[sig]
        if not sinks and not links:
            continue
        tree = lay.trees[sig]
        if drv is None:
            # an undriven net (an alarm nothing can raise) still needs a home
            first = _free_node(grid, sig)
        else:
            root = grid.port_nodes[drv]
            tree[root] = (0, 0)
            grid.occ[root] = sig
            # step out of the driver so the tree has a branch point from the start
            d = OUTWARD[logic.gates[drv[0]].kind]["out"]
            first = neighbour(N, root, d)[0]
            if grid.block[first] or grid.occ[first] != -1 or grid.resv[first] not in (-1, sig) \
                    or grid.eblock[root, d] or grid.eresv[root, d] not in (-1, sig):
                raise RoutingError(f"driver of {logic.names[sig]} is boxed in", sig)
            lay.edges[sig].append((root, d))
        tree[first] = (0, 0)
        grid.occ[first] = sig
        jobs = [(grid.port_nodes[(g, p)], wx, wz, False) for g, p, wx, wz in sinks]
        jobs.sort(key=lambda j: sum(abs(a - b) for a, b in zip(node_site(N, j[0]), node_site(N, first)))
                  + n * (abs(j[1]) + abs(j[2])))
        jobs += [(-1, wx, wz, True) for wx, wz in links]
        for tgt, wx, wz, link in jobs:
            src = [(u, w[0], w[1]) for u, w in tree.items() if grid.branch[u]]
            if not src:
                raise RoutingError(f"no branch point on {logic.names[sig]}")
            prev, end = _bfs(N, nwx, nwz, WX[0], WZ[0], grid.block, grid.resv, grid.eblock, grid.eresv,
                             grid.bcls, grid.occ, grid.occw, grid.branch, sig,
                             np.array(src, dtype=np.int64), tgt, wx, wz, link)
            if end < 0:
                raise RoutingError(f"cannot route {logic.names[sig]} to winding ({wx}, {wz}) in a tile of side {n}",
                                  sig)
            path = []
            st = end
            while st >= 0:
                path.append(_decode(N, st))
                st = prev[st]
            path.reverse()
            inner = [p[0] for p in path[1:-1]]
            if len(set(inner)) != len(inner):
                raise RoutingError(f"route of {logic.names[sig]} overlaps itself", sig)
            for (a, _, _), (b, _, _) in zip(path, path[1:]):
                lay.edges[sig].append((a, _direction(N, a, b)))
            for node, pwx, pwz in path[1:-1]:
                tree[node] = (pwx, pwz)
                grid.occ[node] = sig
                grid.occw[node] = (pwx, pwz)
            if not link:
                tree[path[-1][0]] = (path[-1][1], path[-1][2])
                grid.occ[path[-1][0]] = sig
    return lay


# ---------------------------------------------------------------- rendering and audit


@dataclass
class Rendered:
    chips: np.ndarray          # (n, n, n) background chips of the tile
    owner: np.ndarray          # (n, n, n) -1 empty, gate g -> g, signal s -> G + s
    attach: set[tuple[int, int]]


def render(lay: Layout) -> Rendered:
    n, N = lay.n, lay.N
    G = len(lay.logic.gates)
    chips = np.zeros((n, n, n), np.int8)
    owner = np.full((n, n, n), -1, np.int32)
    attach = set()

    def put(s, c, who):
        s = (s[0] % n, s[1] % n, s[2] % n)
        if owner[s] != -1 and owner[s] != who:
            raise RoutingError(f"site {s} claimed twice")
        chips[s] = c
        owner[s] = who

    for g in range(G):
        gd = lay.gadget(g)
        for s, c in gd.footprint.items():
            put(s, c, g)
    port_nodes = {}
    for g in range(G):
        gd = lay.gadget(g)
        for p, s in gd.ports.items():
            port_nodes[(s[0] - 1) // 3 * N * N + (s[1] - 1) // 3 * N + (s[2] - 1) // 3] = g
    for sig in range(lay.logic.n_signals):
        who = G + sig
        for node in lay.trees[sig]:
            if node in port_nodes:
                attach.add((who, port_nodes[node]))
                continue
            put(node_site(N, node), 5, who)
        for node, d in lay.edges[sig]:
            for s in edge_sites(n, N, node, d):
                put(s, 5, who)
    return Rendered(chips, owner, attach)


@dataclass
class AuditReport:
    max_body: int
    max_face: int
    max_edge: int
    cross_talk: list[tuple[Site, Site]]

    @property
    def ok(self) -> bool:
        return self.max_body <= 2 and self.max_face <= 1 and self.max_edge == 0 and not self.cross_talk


def vertex_class(n: int) -> np.ndarray:
    """Number of coordinates that are 0 mod n, per tile site: 0 body, 1 face, 2 edge, 3 corner."""
    z = (np.arange(n) == 0).astype(np.int8)
    return z[:, None, None] + z[None, :, None] + z[None, None, :]


def audit(r: Rendered) -> AuditReport:
    """Spacing rules for the bomb: deposits on empty body/face/edge sites, and no touching wires."""
    occ = r.owner >= 0
    count = np.zeros(occ.shape, np.int16)
    talk = []
    for axis in range(3):
        for sh in (1, -1):
            count += np.roll(occ, sh, axis=axis)
        other = np.roll(r.owner, -1, axis=axis)
        bad = occ & (other >= 0) & (other != r.owner)
        for s in zip(*np.nonzero(bad)):
            a = int(r.owner[s])
            t = list(s)
            t[axis] = (t[axis] + 1) % occ.shape[axis]
            b = int(r.owner[tuple(t)])
            if (a, b) not in r.attach and (b, a) not in r.attach:
                talk.append((tuple(int(v) for v in s), tuple(t)))
    cls = vertex_class(occ.shape[0])
    empty = ~occ

    def worst(mask):
        m = empty & mask
        return int(count[m].max()) if m.any() else 0

    return AuditReport(worst(cls == 0), worst(cls == 1), worst(cls >= 2), talk)


def place_and_route(logic: CubeLogic, n: int | None = None, cap: int = MAX_SIDE,
                    retries: int = 8) -> tuple[Layout, Rendered]:
    """Route in the smallest power-of-two tile that works, starting at ``n``.

    A net that fails to route is moved to the front of the order and the
    tile is routed again, up to ``retries`` times per side.
    """
    side = n or 32
    last = None
    while side <= cap:
        anchors = place(logic, side)
        first: list[int] = []
        for _ in range(retries if anchors is not None else 0):
            try:
                lay = route(logic, side, anchors, tuple(first))
            except RoutingError as e:
                last = e
                if e.sig is None or e.sig in first:
                    break
                first.insert(0, e.sig)
                continue
            r = render(lay)
            rep = audit(r)
            if not rep.ok:
                raise RoutingError(f"spacing audit failed: {rep}")
            return lay, r
        side *= 2
    raise RoutingError(f"no tile up to side {cap} fits: {last}")
