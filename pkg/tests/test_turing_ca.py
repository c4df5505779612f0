import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sandpile_tm.ca import (
    ERROR, Malformed, CARow, ca_run, ca_step, decode_ca_row, encode_snapshot, head,
    same_configuration, tape, tm_to_ca,
)
from sandpile_tm.textio import ParseError
from sandpile_tm.turing import (
    HaltedError, TuringMachine, corpus, emit_machine, halting_time, initial_snapshot,
    parse_machine, tm_run, tm_step,
)

CORPUS = corpus()


def test_right_mover_advances():
    m = CORPUS["right-mover"].machine
    trace = tm_run(m, initial_snapshot(m), 5)
    assert [s.head for s in trace] == [0, 1, 2, 3, 4, 5]


def test_halter_writes_one_and_halts():
    m = CORPUS["halter"].machine
    s = tm_step(m, initial_snapshot(m))
    assert s.halted and s.tape == {0: "1"}
    with pytest.raises(HaltedError):
        tm_step(m, s)


def test_corpus_halting_times():
    for e in CORPUS.values():
        s = initial_snapshot(e.machine, e.tape)
        assert halting_time(e.machine, s, 200) == e.halts_at


def test_busy_beaver_leaves_five_ones():
    e = CORPUS["busy-beaver-3"]
    final = tm_run(e.machine, initial_snapshot(e.machine), 100)[-1]
    assert sorted(final.tape.values()) == ["1"] * 5


def test_machine_file_roundtrip(tmp_path):
    for e in CORPUS.values():
        text = emit_machine(e.machine, e.tape)
        m, t = parse_machine(text)
        assert m == e.machine and t == e.tape
        assert emit_machine(m, t) == text


def test_machine_file_errors():
    with pytest.raises(ParseError):
        parse_machine("states a\nalphabet 0\nblank 0\nstart a\nfinal\na 0 -> a 0 X\n")
    with pytest.raises(ParseError) as e:
        parse_machine("states a\nalphabet 0\nblank 0\nstart a\nfinal\nbogus\n")
    assert e.value.line == 6
    with pytest.raises(ParseError):
        # delta not total
        parse_machine("states a b\nalphabet 0 1\nblank 0\nstart a\nfinal b\na 0 -> b 0 R\n")


def test_ca_rule_examples():
    m = CORPUS["busy-beaver-3"].machine
    ca = tm_to_ca(m)
    assert ca.f(tape("0"), tape("1"), tape("0")) == tape("1")
    assert ca.f(head("A", "0"), tape("1"), head("B", "0")) == ERROR
    assert ca.f(tape("0"), ERROR, tape("0")) == ERROR
    # delta(B,0) = (B,1,L): head on the right moves left onto us
    assert ca.f(tape("1"), tape("0"), head("B", "0")) == head("B", "0")
    # delta(A,0) = (B,1,R): head on the right moves away
    assert ca.f(tape("1"), tape("0"), head("A", "0")) == tape("0")
    assert ca.f(head("A", "0"), tape("1"), tape("0")) == head("B", "1")
    assert ca.f(tape("0"), head("A", "0"), tape("0")) == tape("1")
    # final heads freeze
    assert ca.f(tape("0"), head("H", "1"), tape("0")) == head("H", "1")
    assert ca.f(head("H", "1"), tape("0"), tape("0")) == tape("0")
    assert ca.f(tape("0"), tape("0"), tape("0")) == tape("0")


def test_state_order():
    ca = tm_to_ca(CORPUS["halter"].machine)
    assert ca.states == [tape("0"), tape("1"), head("q", "0"), head("q", "1"),
                         head("f", "0"), head("f", "1"), ERROR]
    assert ca.bits == 3 and ca.code(head("q", "1")) == (0, 1, 1)


def test_blank_row_is_quiescent():
    ca = tm_to_ca(CORPUS["incrementer"].machine)
    row = CARow(-3, np.full(7, ca.blank, dtype=np.int32))
    for r in ca_run(ca, row, 5):
        assert np.all(r.cells == ca.blank)


def test_error_spreads_one_per_step():
    ca = tm_to_ca(CORPUS["incrementer"].machine)
    cells = np.full(11, ca.blank, dtype=np.int32)
    cells[5] = ca.index[ERROR]
    rows = ca_run(ca, CARow(-5, cells), 3)
    for t, r in enumerate(rows):
        errs = [r.lo + i for i, k in enumerate(r.cells) if k == ca.index[ERROR]]
        assert errs == list(range(-t, t + 1))


def test_decode_malformed():
    ca = tm_to_ca(CORPUS["incrementer"].machine)
    row = CARow(0, np.array([ca.index[ERROR]], dtype=np.int32))
    assert isinstance(decode_ca_row(ca, row), Malformed)
    two = CARow(0, np.array([ca.index[head("s", "1")], ca.blank, ca.index[head("s", "0")]], dtype=np.int32))
    assert isinstance(decode_ca_row(ca, two), Malformed)
    assert isinstance(decode_ca_row(ca, CARow(0, np.array([ca.blank], dtype=np.int32))), Malformed)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_ca_simulates_tm(name):
    e = CORPUS[name]
    ca = tm_to_ca(e.machine)
    s = initial_snapshot(e.machine, e.tape)
    assert same_configuration(decode_ca_row(ca, encode_snapshot(ca, s)), s)
    rows = ca_run(ca, encode_snapshot(ca, s), 30)
    trace = tm_run(e.machine, s, 30)
    for t, row in enumerate(rows):
        want = trace[min(t, len(trace) - 1)]
        assert same_configuration(decode_ca_row(ca, row), want), t


def random_machine(seed):
    rng = np.random.default_rng(seed)
    nq, ng = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    states = [f"q{i}" for i in range(nq)] + ["f"]
    alphabet = [str(i) for i in range(ng)]
    delta = {}
    for q in states[:-1]:
        for g in alphabet:
            delta[(q, g)] = (states[int(rng.integers(0, nq + 1))], alphabet[int(rng.integers(0, ng))],
                             "LR"[int(rng.integers(0, 2))])
    return TuringMachine(tuple(states), "q0", frozenset(["f"]), tuple(alphabet), "0", delta, f"rand{seed}")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_ca_simulates_random_machines(seed):
    m = random_machine(seed)
    ca = tm_to_ca(m)
    s = initial_snapshot(m)
    trace = tm_run(m, s, 25)
    row = encode_snapshot(ca, s)
    for t in range(26):
        got = decode_ca_row(ca, row)
        assert not isinstance(got, Malformed)
        assert same_configuration(got, trace[min(t, len(trace) - 1)])
        row = ca_step(ca, row)
