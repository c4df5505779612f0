"""Run a compiled design and compare every stage of the lowering.

TM trace -> automaton rows -> closure of the expanded cube circuit ->
odometers of the placed sandpile.  Each comparison is exact over the
reported window x in [-X, X], t in [0, T].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ca import CARow, ca_run, decode_ca_row, same_configuration
from ..circuit import eval_closure
from ..lazy import LAZY, LazyRow, decode_lazy_row, lazy_run
from ..turing import initial_snapshot, tm_run
from .compile import BAD, GLOBAL, CompilePlan, PlacedDesign, compile_plan, machine_automaton
from .rules import row_values
from .synth import expand


@dataclass
class StageReport:
    target: str
    window: tuple[int, int]
    tm_rows: bool              # TM trace == decoded automaton rows
    closure_rows: bool         # automaton rows == closure of the cube circuit
    sandpile_rows: bool        # closure == decoded sandpile
    outcome: str
    topplings: int
    origin_step: int | None
    origin_odometer: int
    max_odometer: int
    fired_gates: int
    mismatch: str = ""

    @property
    def ok(self) -> bool:
        return self.tm_rows and self.closure_rows and self.sandpile_rows


def automaton_rows(plan: CompilePlan) -> list[list[int]]:
    """State indices over [-X, X] for t = 0..T, with LAZY where nothing is known."""
    auto, table, row = machine_automaton(plan)
    X, T = plan.window
    if plan.target == GLOBAL:
        run = lazy_run(auto, row, T)
        rows = list(run.rows)
        while len(rows) < T + 1:
            rows.append(LazyRow(0, rows[-1].cells[:0], len(rows)))
    else:
        rows = ca_run(auto, row, T)
    return [row_values(table, r, -X, X) for r in rows]


def tm_agrees(plan: CompilePlan, rows: list[list[int]]) -> bool:
    """Decoded rows reproduce the TM trace (up to the halt for lazy rows)."""
    auto, _, _ = machine_automaton(plan)
    X, T = plan.window
    m = plan.machine
    trace = tm_run(m, initial_snapshot(m, plan.tape), T)
    for t, vals in enumerate(rows):
        want = trace[min(t, len(trace) - 1)]
        if plan.target == GLOBAL:
            if t >= len(trace) or want.halted:
                break
            live = [i for i, v in enumerate(vals) if v != LAZY]
            if not live:
                return False
            cells = np.array(vals[live[0]:live[-1] + 1], dtype=np.int32)
            got = decode_lazy_row(auto, LazyRow(live[0] - X, cells, t), m.blank)
        else:
            got = decode_ca_row(auto, CARow(-X, np.array(vals, dtype=np.int32), t))
        if got is None or not hasattr(got, "tape") or not same_configuration(got, want):
            return False
    return True


def closure_rows(d: PlacedDesign, box) -> list[list[int]]:
    """Cube states read from the least fixpoint of the expanded circuit."""
    (x0, x1), (_, t1) = box
    w = expand(d.logic, x0, x1, t1, [f for f in d.fires if f[1] >= 0 and x0 <= f[0] <= x1])
    fired = eval_closure(w.net).fired
    table, g = d.cube.table, d.grid

    def state(x, t):
        bits = []
        for z, o in d.logic.cells:
            fz, fo = fired[w.wire(x, t, z)], fired[w.wire(x, t, o)]
            if fz and fo:
                return BAD
            bits.append(1 if fo else 0 if fz else None)
        return table.decode_bits(bits)

    return [[state(x, t) for x in range(g.x_lo, g.x_hi + 1)] for t in range(g.t_hi + 1)]


def global_box(plan: CompilePlan):
    """Cube ranges simulated for a lazy design: the window plus a margin of two."""
    X, T = plan.window
    return (-X - 2, X + 2), (-1, T + 1)


def _first_diff(a, b) -> str:
    for t, (ra, rb) in enumerate(zip(a, b)):
        if ra != rb:
            return f"t={t}: {ra} vs {rb}"
    return ""


def stage_check(plan: CompilePlan, budget: int, design: PlacedDesign | None = None) -> StageReport:
    """Compile (unless given), simulate within ``budget`` topplings and compare all stages."""
    d = design or compile_plan(plan)
    box = d.box if d.box is not None else global_box(plan)
    want = automaton_rows(plan)
    tm_ok = tm_agrees(plan, want)
    crows = closure_rows(d, box)
    run = d.simulate(budget, box=box)
    srows = run.rows()
    mismatch = ""
    if crows != want:
        mismatch = "closure " + _first_diff(want, crows)
    elif srows != crows:
        mismatch = "sandpile " + _first_diff(crows, srows)
    elif not tm_ok:
        mismatch = "automaton rows do not decode to the TM trace"
    return StageReport(plan.target, plan.window, tm_ok, crows == want, srows == crows, run.outcome,
                       run.topplings, run.origin_step, run.origin_odometer(), run.max_odometer(),
                       run.fired_gates(), mismatch)


__all__ = ["StageReport", "automaton_rows", "closure_rows", "global_box", "stage_check", "tm_agrees"]
