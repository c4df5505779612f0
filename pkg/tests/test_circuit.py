import random

import pytest
from hypothesis import given, settings, strategies as st

from sandpile_tm.circuit import (
    AND, OR, CellState, NetlistBuilder, emit_netlist, eval_closure, eval_closure_reference,
    parse_netlist, read_cell,
)
from sandpile_tm.textio import ParseError


def test_empty_initial_set():
    b = NetlistBuilder()
    x, y, z = b.wires(3)
    b.gate(OR, [x], [y])
    b.gate(AND, [x, y], [z])
    assert eval_closure(b.build()).fired_set() == set()


def test_and_gate():
    b = NetlistBuilder()
    a, c, o = b.wires(3)
    b.gate(AND, [a, c], [o])
    b.fire_initially(a)
    b.fire_initially(c)
    assert eval_closure(b.build()).fired_set() == {a, c, o}


def test_diamond():
    b = NetlistBuilder()
    a, x, y, d = b.wires(4)
    b.gate(OR, [a], [x])
    b.gate(OR, [a], [y])
    b.gate(AND, [x, y], [d])
    b.fire_initially(a)
    assert eval_closure(b.build()).fired_set() == {a, x, y, d}


def test_duplicate_input_on_and():
    b = NetlistBuilder()
    a, c, o = b.wires(3)
    b.gate(AND, [a, a, c], [o])
    b.fire_initially(a)
    assert eval_closure(b.build()).fired_set() == {a}


def test_read_cell():
    assert read_cell(set(), 0, 1) is CellState.LAZY
    assert read_cell({1}, 0, 1) is CellState.ONE
    assert read_cell({0}, 0, 1) is CellState.ZERO
    assert read_cell({0, 1}, 0, 1) is CellState.CONFLICT


def random_netlist(seed, n_wires=30, n_gates=40):
    rng = random.Random(seed)
    b = NetlistBuilder()
    ws = b.wires(n_wires)
    for _ in range(n_gates):
        ins = rng.sample(ws, rng.randint(1, 3))
        outs = rng.sample(ws, rng.randint(1, 2))
        b.gate(rng.choice([AND, OR]), ins, outs)
    for w in rng.sample(ws, rng.randint(0, 5)):
        b.fire_initially(w)
    b.cell(ws[0], ws[1])
    return b.build()


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_closure_is_order_independent(seed):
    net = random_netlist(seed)
    want = eval_closure(net).fired_set()
    for k in range(3):
        assert eval_closure_reference(net, random.Random(seed + k)) == want


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_text_roundtrip(seed):
    net = random_netlist(seed)
    text = emit_netlist(net)
    back = parse_netlist(text)
    assert emit_netlist(back) == text
    assert eval_closure(back).fired_set() == eval_closure(net).fired_set()


def test_parse_errors():
    with pytest.raises(ParseError) as e:
        parse_netlist("WIRE a\nAND b <- a\n")
    assert e.value.line == 2
    with pytest.raises(ParseError):
        parse_netlist("WIRE a\nWIRE a\n")
    with pytest.raises(ParseError):
        parse_netlist("WIRE a\nCELL c a a\n")
    with pytest.raises(ParseError):
        parse_netlist("NOT a\n")
