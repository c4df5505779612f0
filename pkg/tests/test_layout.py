import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from sandpile_tm.ca import ca_run, encode_snapshot, tm_to_ca
from sandpile_tm.circuit import AND, OR, CellState, NetlistBuilder, eval_closure, read_cell
from sandpile_tm.lazy import LAZY, WILD, LazyAutomaton, LazyRow, PartialRule, lazy_run, tm_to_lazy
from sandpile_tm.layout import (
    CompilePlan, CubeGrid, RuleTable, WindowTooSmall, audit, ca_to_netlist, compile_plan, emit_plan,
    expand, export_design, lazy_to_netlist, load_plan, parse_plan, place_netlist, synthesize,
)
from sandpile_tm.layout.netlist import table_to_netlist
from sandpile_tm.layout.compile import bomb_lemma, bomb_tile, cube_design, local_halting_run, machine_automaton
from sandpile_tm.layout.pipeline import automaton_rows, stage_check
from sandpile_tm.layout.route import vertex_class
from sandpile_tm.layout.rules import row_values
from sandpile_tm.periodic import parse_pf
from sandpile_tm.textio import ParseError
from sandpile_tm.turing import corpus, emit_machine, initial_snapshot
from test_turing_ca import random_machine

CORPUS = corpus()
NAMES = sorted(CORPUS)


def plan(name, target, window):
    e = CORPUS[name]
    return CompilePlan(target, e.machine, e.tape, window)


# ---------------------------------------------------------------- grid and literal netlists


def test_cube_grid_regions():
    g = CubeGrid.symmetric(2, 3, 8)
    assert g.region(1, 2) == ((8, 0, 16), (15, 7, 23))
    assert g.cube_of((15, 3, 16)) == (1, 2)
    assert len(list(g.cubes())) == 5 * 4
    with pytest.raises(ValueError):
        CubeGrid(1, 0, 0)


def test_two_state_table_one_cube():
    rules = [((a, b, c), a ^ c) for a, b, c in itertools.product((0, 1), repeat=3)]
    table = RuleTable(["0", "1"], 1, rules, 0)
    assert table.bits == 1
    cn = table_to_netlist(table, CubeGrid(0, 0, 1))
    assert cn.net.n_gates == 8
    # one cell per cube; the cube and its two ghost neighbours at t = 0 and 1
    assert len(cn.net.cells) == 3 * 2
    assert all(len(cn.net.gate_inputs(g)) == 3 for g in range(8))


def test_five_states_take_three_bits():
    assert RuleTable([str(i) for i in range(5)], 1, [], 0).bits == 3


def test_lazy_rule_gate_width():
    states = [("t", str(i)) for i in range(5)]
    a = LazyAutomaton(states, 1, [PartialRule((0, WILD, 3), 1)])
    cn = lazy_to_netlist(a, CubeGrid(0, 0, 1))
    assert cn.net.n_gates == 0         # both letters read cubes outside a one-cube window
    cn = lazy_to_netlist(a, CubeGrid(-1, 1, 1))
    widths = {len(cn.net.gate_inputs(g)) for g in range(cn.net.n_gates)}
    assert widths == {6}


@pytest.mark.parametrize("name", NAMES)
def test_literal_ca_netlist_matches_ca(name):
    e = CORPUS[name]
    ca = tm_to_ca(e.machine)
    row = encode_snapshot(ca, initial_snapshot(e.machine, e.tape))
    grid = CubeGrid.symmetric(6, 5)
    cn = ca_to_netlist(ca, grid, row)
    table = RuleTable.from_ca(ca)
    want = [row_values(table, r, -6, 6) for r in ca_run(ca, row, 5)]
    assert cn.rows(eval_closure(cn.net).fired) == want


def test_literal_netlist_window_too_small():
    e = CORPUS["busy-beaver-3"]
    ca = tm_to_ca(e.machine)
    row = encode_snapshot(ca, initial_snapshot(e.machine, "1111111"))
    with pytest.raises(WindowTooSmall):
        ca_to_netlist(ca, CubeGrid.symmetric(1, 1), row)


# the busy beaver has ~85k partial rules, so its literal circuit stays short
@pytest.mark.parametrize("name,T", [("right-mover", 6), ("halter", 5), ("incrementer", 4), ("busy-beaver-3", 2)])
def test_literal_lazy_netlist_matches_lazy(name, T):
    e = CORPUS[name]
    a, row = tm_to_lazy(e.machine, initial_snapshot(e.machine, e.tape))
    X = max(-row.lo, row.hi) + T      # the fronts move one square per step
    cn = lazy_to_netlist(a, CubeGrid.symmetric(X, T), row)
    table = RuleTable.from_lazy(a)
    run = lazy_run(a, row, T)
    rows = list(run.rows) + [LazyRow(0, run.rows[-1].cells[:0], t) for t in range(len(run.rows), T + 1)]
    want = [row_values(table, r, -X, X) for r in rows]
    assert cn.rows(eval_closure(cn.net).fired) == want


def _lazy_fired_gates(name, T):
    e = CORPUS[name]
    a, row = tm_to_lazy(e.machine, initial_snapshot(e.machine, e.tape))
    cn = lazy_to_netlist(a, CubeGrid.symmetric(T + 4, T), row)
    return cn.fired_gates(eval_closure(cn.net).gate_fired)


def test_halter_fires_finitely_many_gates():
    # the lazy halter is all lazy from t = 8 on
    assert _lazy_fired_gates("halter", 9) == _lazy_fired_gates("halter", 12) > 0


def test_right_mover_fired_gates_grow():
    counts = [_lazy_fired_gates("right-mover", T) for T in (4, 8, 12)]
    assert counts[0] < counts[1] < counts[2]


# ---------------------------------------------------------------- synthesized cube logic


def _synth_rows(table, row, X, T):
    """Synthesized logic expanded over [-X, X], ghost cubes pinned to the background."""
    logic = synthesize(table)
    r = table.radius
    fires = []
    for x in range(-X, X + 1):
        fires += [(x, 0, logic.cells[m][v]) for m, v in enumerate(table.code(row_values(table, row, x, x)[0]))]
    for t in range(T + 1):
        for x in list(range(-X - r, -X)) + list(range(X + 1, X + r + 1)):
            fires += [(x, t, logic.cells[m][v]) for m, v in enumerate(table.code(table.background))]
    w = expand(logic, -X - r, X + r, T, fires)
    fired = eval_closure(w.net).fired
    out = []
    for t in range(T + 1):
        vals = []
        for x in range(-X, X + 1):
            bits = []
            for z, o in logic.cells:
                s = read_cell(fired, w.wire(x, t, z), w.wire(x, t, o))
                bits.append({CellState.ZERO: 0, CellState.ONE: 1, CellState.LAZY: None}.get(s, -1))
            vals.append(-3 if -1 in bits else table.decode_bits(bits))
        out.append(vals)
    return out


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_synthesized_logic_matches_ca(seed):
    m = random_machine(seed)
    ca = tm_to_ca(m)
    row = encode_snapshot(ca, initial_snapshot(m))
    table = RuleTable.from_ca(ca)
    X, T = 6, 4
    want = [row_values(table, r, -X, X) for r in ca_run(ca, row, T)]
    assert _synth_rows(table, row, X, T) == want


def test_expand_without_fires_stays_quiet():
    e = CORPUS["halter"]
    table = RuleTable.from_ca(tm_to_ca(e.machine))
    logic = synthesize(table, init_chains=True, alarm_states=())
    w = expand(logic, -3, 3, 3)
    assert not eval_closure(w.net).fired.any()


# ---------------------------------------------------------------- plain netlists in one tile


def test_single_and_matches_closure():
    for fire in [(), (0,), (1,), (0, 1)]:
        b = NetlistBuilder()
        a, c, o = b.wires(3)
        b.gate(AND, [a, c], [o])
        for w in fire:
            b.fire_initially(w)
        net = b.build()
        fired, top, outcome = place_netlist(net).simulate()
        assert fired == eval_closure(net).fired_set()
        assert outcome == "Stable" and top <= 1


def test_cell_written_by_gate_reads_one():
    b = NetlistBuilder()
    z, o, x, y = b.wires(4)
    b.gate(AND, [x, y], [o])
    b.cell(z, o)
    b.fire_initially(x)
    b.fire_initially(y)
    fired, _, _ = place_netlist(b.build()).simulate()
    assert read_cell(fired, z, o) is CellState.ONE


def test_empty_netlist_is_empty_design():
    p = place_netlist(NetlistBuilder().build())
    assert p.layout is None
    assert p.simulate() == (set(), 0, "Stable")


@st.composite
def small_netlists(draw):
    b = NetlistBuilder()
    W = b.wires(draw(st.integers(2, 6)))
    for _ in range(draw(st.integers(1, 4))):
        ins = draw(st.lists(st.sampled_from(W), min_size=1, max_size=3, unique=True))
        outs = draw(st.lists(st.sampled_from(W), min_size=1, max_size=2, unique=True))
        b.gate(draw(st.sampled_from([AND, OR])), ins, outs)
    for w in draw(st.lists(st.sampled_from(W), max_size=3, unique=True)):
        b.fire_initially(w)
    return b.build()


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_netlists())
def test_placed_netlist_matches_closure(net):
    fired, top, outcome = place_netlist(net).simulate()
    assert outcome == "Stable"
    assert top <= 1
    assert fired == eval_closure(net).fired_set()


# ---------------------------------------------------------------- routed cubes


@pytest.mark.parametrize("name", NAMES)
@pytest.mark.parametrize("target", ["vertex", "global"])
def test_routed_cube_passes_audit(name, target):
    d = compile_plan(plan(name, target, (4, 3)))
    rep = audit(d.cube.rendered)
    assert rep.ok, rep
    assert rep.max_body <= 2 and rep.max_face <= 1 and rep.max_edge == 0
    assert d.n & (d.n - 1) == 0 and 32 <= d.n <= 1024


def test_vertex_classes():
    c = vertex_class(4)
    assert c[0, 0, 0] == 3 and c[0, 0, 1] == 2 and c[0, 1, 1] == 1 and c[1, 1, 1] == 0


def test_window_too_small_is_rejected():
    with pytest.raises(WindowTooSmall):
        compile_plan(plan("right-mover", "vertex", (2, 6)))


# ---------------------------------------------------------------- stage equivalence


@pytest.mark.parametrize("name", NAMES)
def test_vertex_stage_equivalence(name):
    r = stage_check(plan(name, "vertex", (5, 4)), 10**8)
    assert r.ok, r.mismatch
    assert r.outcome == "Stable" and r.max_odometer == 1


@pytest.mark.parametrize("name", NAMES)
def test_global_stage_equivalence(name):
    r = stage_check(plan(name, "global", (6, 4)), 10**8)
    assert r.ok, r.mismatch
    assert r.max_odometer == 1


def test_vertex_origin_topples_for_halter_only():
    halter = stage_check(plan("halter", "vertex", (3, 3)), 10**8)
    mover = stage_check(plan("right-mover", "vertex", (6, 4)), 10**8)
    assert halter.origin_step is not None and halter.origin_odometer == 1
    assert mover.origin_step is None and mover.origin_odometer == 0


def test_init_wire_reaches_every_cube_on_its_side():
    d = compile_plan(plan("halter", "vertex", (3, 2)))
    run = d.simulate(10**8)
    auto, table, row = machine_automaton(d.plan)
    rc, lc = d.logic.named["rchain"], d.logic.named["lchain"]
    for x in range(-3, 4):
        assert run.fired(x, 0, rc) == (x > row.hi)
        assert run.fired(x, 0, lc) == (x < row.lo)
    # a design with no delta chips never fires
    quiet = d.config.delta.copy()
    d.config.delta.clear()
    try:
        assert d.simulate(10**6).topplings == 0
    finally:
        d.config.delta.update(quiet)


def test_global_halter_stabilizes_on_all_of_z3():
    d = compile_plan(plan("halter", "global", (4, 4)))
    from sandpile_tm.lattice import LatticeSim
    sim = LatticeSim(d.config.background.pattern, d.config.delta)
    res = sim.run(10**7)
    assert res.outcome.value == "Stable"
    assert int(sim.odo.max()) == 1


def test_automaton_rows_are_blank_padded():
    rows = automaton_rows(plan("halter", "vertex", (3, 1)))
    assert len(rows) == 2 and all(len(r) == 7 for r in rows)
    lazy_rows = automaton_rows(plan("halter", "global", (8, 1)))
    assert lazy_rows[0][0] == LAZY


# ---------------------------------------------------------------- the bomb


def test_bomb_tile_counts():
    t = bomb_tile(4)
    assert t[0, 0, 0] == 5 and t[0, 0, 2] == 5 and t[0, 2, 2] == 4 and t[2, 2, 2] == 3


def test_bare_bomb_spreads_and_keeps_toppling():
    rep = bomb_lemma(4, 20_000)
    assert rep.untoppled == 0
    assert rep.origin_odometers[1] > rep.origin_odometers[0] >= 1


def test_local_halting_design_explodes():
    d = compile_plan(plan("halter", "local", (3, 3)))
    assert audit(d.cube.rendered).ok
    assert d.config.background.pattern.max() <= 5
    rep = local_halting_run(d, 200_000)
    assert rep.origin_step is not None
    assert rep.untoppled == 0


# ---------------------------------------------------------------- files


def test_plan_roundtrip(tmp_path):
    e = CORPUS["incrementer"]
    (tmp_path / "inc.tm").write_text(emit_machine(e.machine, e.tape))
    (tmp_path / "inc.plan").write_text("target global\nmachine inc.tm\nwindow 5 7\nside 64\n")
    p = load_plan(tmp_path / "inc.plan")
    assert p.target == "GlobalHalting" and p.window == (5, 7) and p.side == 64 and p.tape == e.tape
    again = parse_plan(emit_plan(p), base=tmp_path)
    assert (again.target, again.window, again.side, again.tape) == (p.target, p.window, p.side, p.tape)


@pytest.mark.parametrize("text", [
    "target vertex\nwindow 3 3\n",
    "target vertex\nmachine m.tm\nwindow 3\n",
    "target nowhere\nmachine m.tm\nwindow 3 3\n",
    "target vertex\nmachine m.tm\nwindow 3 3\nside 48\n",
    "target vertex\nmachine missing.tm\nwindow 3 3\n",
    "colour blue\n",
])
def test_plan_errors(tmp_path, text):
    e = CORPUS["halter"]
    (tmp_path / "m.tm").write_text(emit_machine(e.machine, e.tape))
    with pytest.raises(ParseError):
        parse_plan(text, base=tmp_path)


def test_export_design(tmp_path):
    d = compile_plan(plan("halter", "vertex", (3, 3)))
    pf, ports = export_design(d, tmp_path / "halter.pf")
    cfg = parse_pf(pf.read_text())
    assert np.array_equal(cfg.background.pattern, d.config.background.pattern)
    assert cfg.delta == d.config.delta
    lines = ports.read_text().splitlines()
    assert lines[0] == f"# side {d.n}"
    name, x, y, z = lines[2].split()
    assert d.port_map()[name] == (int(x), int(y), int(z))
