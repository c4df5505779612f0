"""Sandpile wires and gates built from 5-chip paths, plus a harness to fire them.

Canonical orientation: signals run in +x, gate outputs leave in -y and the
diode helper sites sit at +y.  Everything lives in the plane z = 0 until a
:meth:`Gadget.transform` moves it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Outcome
from .lattice import LatticeSim
from .textio import read_csv, slice_grid, write_csv

Site = tuple[int, int, int]

NEIGHBOURS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
_EMPTY = np.zeros((1, 1, 1), dtype=np.int64)


class GadgetError(ValueError):
    pass


class GadgetDefect(RuntimeError):
    """A gadget run did not stabilize; the layout itself is broken."""


def _add(a: Site, b: Site) -> Site:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _nbrs(s: Site):
    return [_add(s, d) for d in NEIGHBOURS]


def _site(s) -> Site:
    s = tuple(int(c) for c in s)
    return s + (0,) * (3 - len(s))


@dataclass
class Gadget:
    name: str
    footprint: dict[Site, int]
    inputs: dict[str, Site] = field(default_factory=dict)
    outputs: dict[str, Site] = field(default_factory=dict)
    deposit_bound: int = 2

    def __post_init__(self):
        for s, c in self.footprint.items():
            if not 0 <= c <= 5:
                raise GadgetError(f"site {s} holds {c} chips; gadget sites hold 0..5")
        for p, s in {**self.inputs, **self.outputs}.items():
            if s not in self.footprint:
                raise GadgetError(f"port {p} at {s} is not on the gadget")

    @property
    def ports(self) -> dict[str, Site]:
        return {**self.inputs, **self.outputs}

    def transform(self, matrix: Sequence[Sequence[int]], offset: Site = (0, 0, 0)) -> "Gadget":
        """Apply a signed permutation matrix, then translate."""
        m = np.asarray(matrix, dtype=np.int64)
        if m.shape != (3, 3) or sorted(np.abs(m).sum(axis=0)) != [1, 1, 1] or \
                sorted(np.abs(m).sum(axis=1)) != [1, 1, 1] or abs(round(np.linalg.det(m))) != 1:
            raise GadgetError("transform must be a signed permutation matrix")

        def f(s: Site) -> Site:
            return _add(tuple(int(c) for c in m @ np.array(s)), offset)

        return Gadget(self.name, {f(s): c for s, c in self.footprint.items()},
                      {k: f(s) for k, s in self.inputs.items()},
                      {k: f(s) for k, s in self.outputs.items()}, self.deposit_bound)

    def translate(self, offset: Site) -> "Gadget":
        return self.transform(np.eye(3, dtype=int), offset)

    def static_deposit(self) -> int:
        """Largest number of footprint neighbours of any empty site."""
        best = 0
        for s in self.footprint:
            for t in _nbrs(s):
                if t not in self.footprint:
                    best = max(best, sum(u in self.footprint for u in _nbrs(t)))
        return best

    def junctions(self) -> set[Site]:
        """Sites that are not the interior of a straight 5-chip run."""
        out = set()
        for s, c in self.footprint.items():
            nb = [d for d in NEIGHBOURS if _add(s, d) in self.footprint]
            straight = len(nb) == 2 and all(a + b == 0 for a, b in zip(*nb))
            if c != 5 or (len(nb) > 1 and not straight) or len(nb) > 2:
                out.add(s)
        return out

    def slice(self, z: int, xs: range, ys: range) -> str:
        return slice_grid(self.footprint, z, xs, ys)

    def bounds(self) -> tuple[Site, Site]:
        a = np.array(list(self.footprint))
        return tuple(int(v) for v in a.min(axis=0)), tuple(int(v) for v in a.max(axis=0))


def _check_path(path: Sequence[Site]) -> list[Site]:
    path = [_site(s) for s in path]
    if not path:
        raise GadgetError("empty path")
    if len(set(path)) != len(path):
        raise GadgetError("path visits a site twice")
    for i in range(1, len(path)):
        if sum(abs(a - b) for a, b in zip(path[i], path[i - 1])) != 1:
            raise GadgetError(f"sites {path[i - 1]} and {path[i]} are not adjacent")
    index = {s: i for i, s in enumerate(path)}
    for i, s in enumerate(path):
        for t in _nbrs(s):
            j = index.get(t)
            if j is not None and abs(i - j) > 1:
                raise GadgetError(f"path touches itself at {s} and {t}")
    bends = [i for i in range(1, len(path) - 1)
             if tuple(b - a for a, b in zip(path[i - 1], path[i])) != tuple(b - a for a, b in zip(path[i], path[i + 1]))]
    for a, b in zip(bends, bends[1:]):
        if b - a < 2:
            raise GadgetError(f"bends at {path[a]} and {path[b]} are closer than two straight steps")
    return path


def build_wire(path: Sequence[Site], name: str = "wire") -> Gadget:
    path = _check_path(path)
    g = Gadget(name, {s: 5 for s in path}, {"a": path[0]}, {"b": path[-1]})
    if g.static_deposit() > 2:
        raise GadgetError("an empty site would sit next to three wire sites")
    return g


def build_branch(stem: Sequence[Site], arms: Sequence[Sequence[Site]], name: str = "branch") -> Gadget:
    """A wire that splits: every arm starts next to the last stem site."""
    stem = _check_path(stem)
    if not 2 <= len(arms) <= 4:
        raise GadgetError("a branch has 2 to 4 arms")
    fp = {s: 5 for s in stem}
    outputs = {}
    for k, arm in enumerate(arms):
        arm = _check_path(arm)
        if arm[0] not in _nbrs(stem[-1]):
            raise GadgetError(f"arm {k} does not start next to the branch point")
        for s in arm:
            if s in fp:
                raise GadgetError(f"arm {k} overlaps the branch at {s}")
            fp[s] = 5
        outputs[f"b{k}"] = arm[-1]
    g = Gadget(name, fp, {"a": stem[0]}, outputs)
    if g.static_deposit() > 2:
        raise GadgetError("an empty site would sit next to three wire sites")
    return g


def _straight(a: int, b: int, y: int = 0, z: int = 0) -> list[Site]:
    step = 1 if b >= a else -1
    return [(x, y, z) for x in range(a, b + step, step)]


def build_diode(stub: int = 3) -> Gadget:
    """Left stub ending at P=(0,0,0), 4-chip throat at (1,0,0), right stub from (2,0,0).

    The two helper sites sit above P and above the throat.
    """
    fp = {s: 5 for s in _straight(1 - stub, 0)}
    fp[(1, 0, 0)] = 4
    fp[(0, 1, 0)] = 5
    fp[(1, 1, 0)] = 5
    fp.update({s: 5 for s in _straight(2, 1 + stub)})
    return Gadget("diode", fp, {"in": (1 - stub, 0, 0)}, {"out": (1 + stub, 0, 0)})


def _wait(centre: int, name: str, arm: int) -> Gadget:
    fp = {(0, 0, 0): centre}
    fp.update({s: 5 for s in _straight(-arm, -1)})
    fp.update({s: 5 for s in _straight(1, arm)})
    fp.update({(0, -k, 0): 5 for k in range(1, arm + 1)})
    return Gadget(name, fp, {"left": (-arm, 0, 0), "right": (arm, 0, 0), "down": (0, -arm, 0)})


def build_wait2(arm: int = 3) -> Gadget:
    return _wait(4, "wait2", arm)


def build_wait1(arm: int = 3) -> Gadget:
    return _wait(5, "wait1", arm)


def _gate2(centre: int, lstub: int, rstub: int, arm: int) -> dict[Site, int]:
    """Two diodes facing a wait gate whose centre is at (3,0,0); output arm runs down."""
    fp = {s: 5 for s in _straight(1 - lstub, 0)}
    fp.update({(1, 0, 0): 4, (0, 1, 0): 5, (1, 1, 0): 5, (2, 0, 0): 5})
    fp[(3, 0, 0)] = centre
    fp.update({(4, 0, 0): 5, (5, 0, 0): 4, (5, 1, 0): 5, (6, 1, 0): 5})
    fp.update({s: 5 for s in _straight(6, 5 + rstub)})
    fp.update({(3, -k, 0): 5 for k in range(1, arm + 1)})
    return fp


def _gate(k: int, centre: int, name: str, stub: int = 3) -> Gadget:
    """Left-leaning chain of two-input gates.

    Gate i sits at offset (6i, -4i).  Its output arm drops to y = -4(i+1),
    bends to +x and becomes the left input wire of gate i+1.
    """
    if k < 2:
        raise GadgetError("fan-in must be at least 2")
    fp: dict[Site, int] = {}
    inputs = {"in0": (1 - stub, 0, 0)}
    for i in range(k - 1):
        ox, oy = 6 * i, -4 * i
        last = i == k - 2
        part = _gate2(centre, stub if i == 0 else 1, stub, 3 if last else 4)
        for (x, y, z), c in part.items():
            s = (x + ox, y + oy, z)
            if s in fp and fp[s] != c:
                raise GadgetError(f"chained gates collide at {s}")
            fp[s] = c
        if not last:
            # bend from the bottom of the arm over to the next gate's left input
            fp.update({(ox + 3 + j, oy - 4, 0): 5 for j in range(1, 4)})
        inputs[f"in{i + 1}"] = (ox + 5 + stub, oy, 0)
    out = (6 * (k - 2) + 3, -4 * (k - 2) - 3, 0)
    return Gadget(f"{name}{k}", fp, inputs, {"out": out})


def build_and(k: int = 2) -> Gadget:
    return _gate(k, 4, "and")


def build_or(k: int = 2) -> Gadget:
    return _gate(k, 5, "or")


# ---------------------------------------------------------------- harness


@dataclass
class GadgetReport:
    fired: set[str]
    fired_outputs: set[str]
    backfired_inputs: set[str]
    max_deposit: int
    max_odometer: int
    odometer: dict[Site, int]
    chips: dict[Site, int]

    def chips_at(self, s: Site) -> int:
        return self.chips.get(s, 0)


def verify_gadget(g: Gadget, firing: Iterable[str], budget: int | None = None) -> GadgetReport:
    """Add a chip at each named port, stabilize alone in empty space, classify ports.

    Any port name may be fired, outputs included, to drive a gate backwards.
    """
    firing = set(firing)
    unknown = firing - set(g.ports)
    if unknown:
        raise GadgetError(f"unknown ports {sorted(unknown)}")
    delta = dict(g.footprint)
    for p in firing:
        delta[g.ports[p]] += 1
    sim = LatticeSim(_EMPTY, delta)
    res = sim.run(budget if budget is not None else 20 * len(delta) + 100)
    if res.outcome is not Outcome.STABLE:
        raise GadgetDefect(f"{g.name} did not stabilize when firing {sorted(firing)}")
    chips = sim.materialized()
    toppled = {p for p, s in g.ports.items() if res.odometer.get(s, 0) > 0}
    off = [c for s, c in chips.items() if s not in g.footprint]
    return GadgetReport(
        fired=firing,
        fired_outputs={p for p in g.outputs if p in toppled},
        backfired_inputs={p for p in g.inputs if p in toppled and p not in firing},
        max_deposit=max(off, default=0),
        max_odometer=max(res.odometer.values(), default=0),
        odometer=res.odometer,
        chips=chips,
    )


# ---------------------------------------------------------------- fixtures

ATLAS = {
    "diode": build_diode,
    "wait2": build_wait2,
    "wait1": build_wait1,
    "and2": lambda: build_and(2),
    "or2": lambda: build_or(2),
}


def write_fixture(g: Gadget, directory: Path, stem: str | None = None) -> None:
    directory = Path(directory)
    stem = stem or g.name
    (directory / f"{stem}.csv").write_text(write_csv(g.footprint.items()))
    lines = ["port,kind,x,y,z"]
    for kind, ports in (("in", g.inputs), ("out", g.outputs)):
        for name, (x, y, z) in sorted(ports.items()):
            lines.append(f"{name},{kind},{x},{y},{z}")
    (directory / f"{stem}.ports").write_text("\n".join(lines) + "\n")


def read_fixture(directory: Path, stem: str) -> Gadget:
    directory = Path(directory)
    fp = read_csv((directory / f"{stem}.csv").read_text(), f"{stem}.csv")
    inputs, outputs = {}, {}
    for line in (directory / f"{stem}.ports").read_text().splitlines()[1:]:
        name, kind, x, y, z = line.split(",")
        (inputs if kind == "in" else outputs)[name] = (int(x), int(y), int(z))
    return Gadget(stem, fp, inputs, outputs)


def _fig1_wire() -> Gadget:
    return build_wire(_straight(0, 7))


# name -> (builder, fired ports, x range, y range) of the after-image slice at z = 0
GOLDEN_CASES = {
    "fig1_wire": (_fig1_wire, ("b",), range(-1, 9), range(-1, 2)),
    "fig3_diode_left": (build_diode, ("in",), range(-2, 4), range(-1, 3)),
    "fig3_diode_right": (build_diode, ("out",), range(-2, 4), range(-1, 3)),
    "fig4_and_none": (build_and, (), range(-3, 10), range(-4, 3)),
    "fig4_and_left": (build_and, ("in0",), range(-3, 10), range(-4, 3)),
    "fig4_and_right": (build_and, ("in1",), range(-3, 10), range(-4, 3)),
    "fig4_and_both": (build_and, ("in0", "in1"), range(-3, 10), range(-4, 3)),
    "fig5_and_left_bottom": (build_and, ("in0", "out"), range(-3, 10), range(-4, 3)),
    "fig6_or_left": (build_or, ("in0",), range(-3, 10), range(-4, 3)),
    "fig6_or_right": (build_or, ("in1",), range(-3, 10), range(-4, 3)),
    "fig6_or_both": (build_or, ("in0", "in1"), range(-3, 10), range(-4, 3)),
}


def golden_slice(name: str) -> str:
    builder, firing, xs, ys = GOLDEN_CASES[name]
    rep = verify_gadget(builder(), firing)
    return slice_grid(rep.chips, 0, xs, ys)


def write_golden(directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in GOLDEN_CASES:
        (directory / f"{name}.txt").write_text(golden_slice(name))
    for name, builder in ATLAS.items():
        write_fixture(builder(), directory, name)
