"""Literal circuits: one AND gate per rule per cube, as in the construction.

Every cube carries 2b state wires, wire ``base + 2m + v`` being the wire
that topples when bit m holds v (v = 1 is w_m, v = 0 is the barred wire).
These netlists are large but direct, so they serve as oracles for the
synthesized and placed circuits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ca import CARow, CellularAutomaton
from ..circuit import AND, CellState, Netlist, read_cell
from ..lazy import LAZY, WILD, LazyAutomaton, LazyRow
from .grid import CubeGrid
from .rules import RuleTable, row_values


class WindowTooSmall(ValueError):
    pass


@dataclass
class CubeNetlist:
    net: Netlist
    table: RuleTable
    grid: CubeGrid
    base: np.ndarray          # (t_hi+1, width + 2r) first wire of each cube, -1 if absent
    ghost: int                # columns of ghost cubes on each side

    def wire(self, x: int, t: int, m: int, v: int) -> int:
        b = int(self.base[t, x - self.grid.x_lo + self.ghost])
        if b < 0:
            raise KeyError((x, t))
        return b + 2 * m + v

    def cube_value(self, fired, x: int, t: int) -> int:
        bits = []
        for m in range(self.table.bits):
            s = read_cell(fired, self.wire(x, t, m, 0), self.wire(x, t, m, 1))
            bits.append({CellState.ZERO: 0, CellState.ONE: 1, CellState.LAZY: None}.get(s, -1))
        if -1 in bits:
            return -3
        return self.table.decode_bits(bits)

    def rows(self, fired) -> list[list[int]]:
        """Decoded cube values, one list per time over x_lo..x_hi."""
        g = self.grid
        return [[self.cube_value(fired, x, t) for x in range(g.x_lo, g.x_hi + 1)]
                for t in range(g.t_hi + 1)]

    def fired_gates(self, gate_fired: np.ndarray) -> int:
        return int(gate_fired.sum())


def _initial_fires(table: RuleTable, row, grid: CubeGrid, base, ghost) -> list[int]:
    out = []
    vals = row_values(table, row, grid.x_lo, grid.x_hi)
    for x, s in zip(range(grid.x_lo, grid.x_hi + 1), vals):
        if s == LAZY:
            continue
        b = base[0, x - grid.x_lo + ghost]
        out.extend(b + 2 * m + v for m, v in enumerate(table.code(s)))
    return out


def table_to_netlist(table: RuleTable, grid: CubeGrid, row0: CARow | LazyRow | None = None) -> CubeNetlist:
    """Per-rule AND gates for every cube of the window.

    A background state (CA) is supplied by ghost cubes just outside the
    window whose cells are toppled from the start.  Without a background
    (lazy automata) nothing outside the window ever fires, so gates that
    would read it are left out.
    """
    r, b = table.radius, table.bits
    ghost = r if table.background is not None else 0
    T, W = grid.t_hi, grid.width
    base = np.full((T + 1, W + 2 * r), -1, dtype=np.int64)
    ncols = W + 2 * ghost
    base[:, r - ghost:r - ghost + ncols] = (np.arange((T + 1) * ncols).reshape(T + 1, ncols)) * 2 * b
    n_wires = (T + 1) * ncols * 2 * b
    # base is indexed with an r-column pad; re-index ghost-relative below
    padded = base
    base_g = base[:, r - ghost:r - ghost + ncols]

    init: list[int] = []
    if row0 is not None:
        if table.background is not None:
            xs = list(range(row0.lo, row0.lo + len(row0.cells)))
            if xs and (min(xs) < grid.x_lo or max(xs) > grid.x_hi):
                raise WindowTooSmall("initial data lies outside the window")
        init.extend(_initial_fires(table, row0, grid, base_g, ghost))
    if ghost:
        bg = table.code(table.background)
        for t in range(T + 1):
            for j in list(range(ghost)) + list(range(ghost + W, ncols)):
                init.extend(int(base_g[t, j]) + 2 * m + v for m, v in enumerate(bg))

    # one gate per (rule, cube) with t >= 1, x in window
    xs = np.arange(W)
    ins_chunks, outs_chunks, counts = [], [], []
    for pattern, result in table.rules:
        pos = [(i, p) for i, p in enumerate(pattern) if p != WILD]
        # column of each read cube in `padded`: x index + r + (i - r) = x index + i
        src_cols = np.array([i for i, _ in pos], dtype=np.int64)
        offs = np.array([[2 * m + v for m, v in enumerate(table.code(p))] for _, p in pos], dtype=np.int64)
        rbits = np.array([2 * m + v for m, v in enumerate(table.code(result))], dtype=np.int64)
        for t in range(1, T + 1):
            src = padded[t - 1][xs[:, None] + src_cols[None, :]]          # (W, k)
            ok = (src >= 0).all(axis=1)
            if not ok.any():
                continue
            src = src[ok]
            ins = (src[:, :, None] + offs[None, :, :]).reshape(len(src), -1)
            outs = padded[t][xs[ok] + r][:, None] + rbits[None, :]
            ins_chunks.append(ins)
            outs_chunks.append(outs)
            counts.append(len(src))
    if ins_chunks:
        flat_in = [c.reshape(-1) for c in ins_chunks]
        flat_out = [c.reshape(-1) for c in outs_chunks]
        in_sizes = np.concatenate([np.full(len(c), c.shape[1]) for c in ins_chunks])
        out_sizes = np.concatenate([np.full(len(c), c.shape[1]) for c in outs_chunks])
        ins = np.concatenate(flat_in)
        outs = np.concatenate(flat_out)
    else:
        in_sizes = out_sizes = np.zeros(0, dtype=np.int64)
        ins = outs = np.zeros(0, dtype=np.int64)
    in_ptr = np.concatenate([[0], np.cumsum(in_sizes)]).astype(np.int64)
    out_ptr = np.concatenate([[0], np.cumsum(out_sizes)]).astype(np.int64)
    n_gates = len(in_sizes)
    cells = np.arange(n_wires, dtype=np.int64).reshape(-1, 2)
    net = Netlist(n_wires, np.full(n_gates, AND, dtype=np.int8), in_ptr, ins.astype(np.int64),
                  out_ptr, outs.astype(np.int64), cells, np.array(sorted(set(init)), dtype=np.int64),
                  [None] * n_wires, [f"c{i}" for i in range(len(cells))])
    net.validate()
    # re-express base relative to the ghost-padded columns for lookups
    return CubeNetlist(net, table, grid, base_g.copy(), ghost)


def ca_to_netlist(ca: CellularAutomaton, grid: CubeGrid, row0: CARow | None = None) -> CubeNetlist:
    return table_to_netlist(RuleTable.from_ca(ca), grid, row0)


def lazy_to_netlist(a: LazyAutomaton, grid: CubeGrid, row0: LazyRow | None = None) -> CubeNetlist:
    return table_to_netlist(RuleTable.from_lazy(a), grid, row0)
