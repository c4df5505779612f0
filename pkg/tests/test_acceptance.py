"""Acceptance criteria 1-9.

Each test is one criterion; its docstring's first line is the title printed in
the PASS/FAIL summary at the end of the run (see conftest.py).  Running this
file directly does the same through pytest.
"""

import random
import time
from functools import cache
from pathlib import Path

import numpy as np
import pytest

from sandpile_tm.abelian2d import HORIZONTAL, NORMAL, crossing, emit_grid, fire_sequence, net_stabilize
from sandpile_tm.core import Configuration, Graph, Outcome, decide_finite_halting, stabilize, tardos_cap
from sandpile_tm.gadgets import GOLDEN_CASES, golden_slice
from sandpile_tm.lattice import LatticeSim
from sandpile_tm.layout import CompilePlan, compile_plan
from sandpile_tm.layout.compile import DesignRun, bomb_lemma
from sandpile_tm.layout.pipeline import stage_check
from sandpile_tm.lazy import LAZY, front_positions, lazy_run, tm_to_lazy
from sandpile_tm.periodic import PeriodicBackground, decide_periodic
from sandpile_tm.turing import corpus, halting_time, initial_snapshot, tm_run
from conftest import random_graph
from test_abelian2d import FIG8, XS, YS, _frame
from test_periodic import brute_force

FIX = Path(__file__).parent / "fixtures"
CORPUS = corpus()
NAMES = sorted(CORPUS)
BUDGET = 10**8

# vertex-prediction windows (X, T) with T = 30; X covers each machine's head excursion
VP_WINDOWS = {"right-mover": (31, 30), "halter": (4, 30), "incrementer": (8, 30), "busy-beaver-3": (6, 30)}
GH_TS = (10, 20, 30)


def plan(name, target, window):
    e = CORPUS[name]
    return CompilePlan(target, e.machine, e.tape, window)


@cache
def vertex_report(name):
    return stage_check(plan(name, "vertex", VP_WINDOWS[name]), BUDGET)


@cache
def mover_report(T):
    return stage_check(plan("right-mover", "global", (T + 4, T)), BUDGET)


@cache
def unwindowed(name, budget):
    """(outcome, max odometer, fired gates after each half of the budget) on all of Z^3."""
    d = compile_plan(plan(name, "global", (6, 4)))
    sim = LatticeSim(d.config.background.pattern, d.config.delta)
    fired = []
    for _ in range(2):
        res = sim.run(budget // 2)
        fired.append(DesignRun(d, sim, res.outcome.value, sim.topplings, None).fired_gates_anywhere())
        if res.outcome is Outcome.STABLE:
            break
    live = sim.odo[sim.keys != -1]
    return res.outcome, int(live.max()), tuple(fired)


def test_criterion_1_gadget_atlas():
    """1 gadget atlas: golden slices byte-identical, < 1 s each"""
    for name in sorted(GOLDEN_CASES):
        t0 = time.perf_counter()
        got = golden_slice(name)
        assert time.perf_counter() - t0 < 1.0, name
        assert got == (FIX / "golden" / f"{name}.txt").read_text(), name


def _random_digraph(rng, n):
    """Directed multigraph, every vertex with out-degree 1 to 4."""
    return Graph([[rng.randrange(n) for _ in range(rng.randrange(1, 5))] for _ in range(n)])


def test_criterion_2_abelian_property():
    """2 abelian property: 100 random graphs x 20 orders, identical odometers"""
    t0 = time.perf_counter()
    rng = random.Random(2)
    checked = 0
    while checked < 100:
        n = rng.randrange(2, 31)
        g = random_graph(rng, n, rng.uniform(0.05, 0.3)) if checked % 2 else _random_digraph(rng, n)
        deg = [int(d) for d in g.degree]
        # a stable background with one pile bringing the total near sum(d - 1),
        # the most a stable configuration can hold
        chips = [rng.randrange(0, d // 2 + 1) for d in deg]
        chips[rng.randrange(n)] += max(0, sum(deg) - n - rng.randrange(0, n + 1) - sum(chips))
        cap = tardos_cap(g) if checked % 2 else 10**5
        base = stabilize(Configuration(g, chips), cap + 1)
        if base.outcome is not Outcome.STABLE or base.odometer.total() == 0:
            continue            # no final odometer, or nothing to reorder
        for k in range(20):
            other = stabilize(Configuration(g, chips), cap + 1, rng=random.Random(1000 * checked + k))
            assert other.outcome is Outcome.STABLE
            assert np.array_equal(other.odometer.counts, base.odometer.counts)
            assert np.array_equal(other.config.chips, base.config.chips)
        checked += 1
    assert time.perf_counter() - t0 < 30


def test_criterion_3_periodic_decider():
    """3 periodic decider: fixed rows and 50 random backgrounds vs torus brute force"""
    t0 = time.perf_counter()
    assert decide_periodic(PeriodicBackground.constant(5)).line() == "N N N"
    pat = np.full((2, 1, 1), 5)
    pat[0, 0, 0] = 6
    assert decide_periodic(PeriodicBackground(pat)).line() == "Y Y Y"
    rng = np.random.default_rng(3)
    for k in range(50):
        shape = tuple(int(s) for s in rng.integers(1, 4, size=3))
        pattern = rng.integers(0, 8, size=shape)
        assert decide_periodic(PeriodicBackground(pattern)).line() == brute_force(pattern, seed=k), pattern
    assert time.perf_counter() - t0 < 60


def test_criterion_4_finite_decider():
    """4 finite decider: capped verdict agrees with a 10x-cap run on 50 graphs"""
    t0 = time.perf_counter()
    rng = random.Random(4)
    verdicts = []
    for _ in range(50):
        g = random_graph(rng, rng.randrange(2, 16), rng.uniform(0.1, 0.5))
        chips = [rng.randrange(0, 2 * int(d) + 1) for d in g.degree]
        v = decide_finite_halting(g, Configuration(g, chips))
        long = stabilize(Configuration(g, chips), 10 * tardos_cap(g), rng=random.Random(rng.random()))
        assert v.halts == (long.outcome is Outcome.STABLE)
        verdicts.append(v.halts)
    assert any(verdicts) and not all(verdicts)
    assert time.perf_counter() - t0 < 60


def test_criterion_5_stage_equivalence():
    """5 stage equivalence: TM = CA = closure = sandpile, every corpus machine, T = 30"""
    t0 = time.perf_counter()
    for name in NAMES:
        r = vertex_report(name)
        assert r.window[1] == 30
        assert r.ok, (name, r.mismatch)
        assert r.outcome == "Stable"
    assert vertex_report("halter").origin_step is not None
    assert vertex_report("right-mover").origin_step is None
    assert time.perf_counter() - t0 < 600


def test_criterion_6_global_halting():
    """6 global halting: halters reach Stable, right-mover grows and runs out of budget"""
    for name in ("halter", "busy-beaver-3"):
        outcome, _, _ = unwindowed(name, 2 * 10**7)
        assert outcome is Outcome.STABLE, name
    reports = [mover_report(T) for T in GH_TS]
    assert all(r.ok for r in reports), [r.mismatch for r in reports]
    counts = [r.fired_gates for r in reports]
    assert counts[0] < counts[1] < counts[2], counts
    outcome, _, fired = unwindowed("right-mover", 2_000_000)
    assert outcome is Outcome.BUDGET_EXHAUSTED
    assert fired[0] < fired[1]
    # the lazy automaton itself: wavefronts at speed 1, laziness at speed 2 after a halt
    for name in NAMES:
        e = CORPUS[name]
        s = initial_snapshot(e.machine, e.tape)
        a, row = tm_to_lazy(e.machine, s)
        run = lazy_run(a, row, 120)
        trace = tm_run(e.machine, s, 120)
        th = halting_time(e.machine, s, 120)
        assert (th is None) == (name == "right-mover")
        l0, r0 = front_positions(a, run.rows[0])
        for t, r in enumerate(run.rows[: (th if th is not None else len(run.rows)) + 1]):
            assert front_positions(a, r) == (l0 - t, r0 + t)
            assert trace[t].head - (l0 - t) > 2 and (r0 + t) - trace[t].head > 2
        if th is None:
            continue
        x0, seen = trace[th].head, 0
        for k in range(1, 120 - th):
            r = run.rows[th + k]
            l, rr = front_positions(a, r)
            if l is None or rr is None or x0 - (2 * k - 1) <= l + 2 or x0 + (2 * k - 1) >= rr - 2:
                break
            assert [x for x in range(l, rr + 1) if r.at(x) == LAZY] == list(range(x0 - 2 * k + 1, x0 + 2 * k))
            seen += 1
        assert seen > 0 or run.status == "Halted"


def test_criterion_7_bomb():
    """7 bomb: every site of the |x|+|y|+|z| <= 12 ball topples; origin odometer grows"""
    rep = bomb_lemma(4, 20_000, radius=15, ball=12)
    assert rep.origin_step is not None
    assert rep.untoppled == 0
    assert rep.origin_odometers[1] > rep.origin_odometers[0] >= 1


def test_criterion_8_crossover():
    """8 crossover: figure sequence exact, crossed firings order-independent"""
    s = crossing(3)
    assert emit_grid(s, XS, YS) == _frame(FIG8[0])
    s.add((-1, 0))
    frames, legal = fire_sequence(s, [((-1, 0), NORMAL), ((0, 0), HORIZONTAL), ((1, 0), NORMAL)])
    assert legal
    assert [emit_grid(f, XS, YS) for f in frames] == [_frame(t) for t in FIG8[1:]]
    finals = []
    for seed in range(20):
        c = crossing(3)
        c.add((-3, 0))
        c.add((0, 3))
        res = net_stabilize(c, 1000, random.Random(seed))
        assert res.outcome is Outcome.STABLE
        finals.append((emit_grid(res.state, range(-5, 6), range(-5, 6)), sorted(res.odometer.items())))
    assert all(f == finals[0] for f in finals)


def test_criterion_9_one_shot():
    """9 one-shot: max odometer 1 in every criterion 5-6 design"""
    for name in NAMES:
        assert vertex_report(name).max_odometer == 1, name
    for T in GH_TS:
        assert mover_report(T).max_odometer == 1, T
    for name, budget in (("halter", 2 * 10**7), ("busy-beaver-3", 2 * 10**7), ("right-mover", 2_000_000)):
        assert unwindowed(name, budget)[1] == 1, name


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
