from itertools import combinations
from pathlib import Path

import pytest

from sandpile_tm.gadgets import (
    ATLAS, GOLDEN_CASES, GadgetError, build_and, build_branch, build_diode, build_or,
    build_wait1, build_wait2, build_wire, golden_slice, read_fixture, verify_gadget,
)

FIX = Path(__file__).parent / "fixtures"


def subsets(names):
    names = sorted(names)
    for r in range(len(names) + 1):
        yield from combinations(names, r)


@pytest.mark.parametrize("name,builder,xs,ys", [
    ("fig2_wait2", build_wait2, range(-3, 4), range(-2, 1)),
    ("fig2_wait1", build_wait1, range(-3, 4), range(-2, 1)),
    ("fig3_diode", build_diode, range(-2, 4), range(0, 2)),
    ("fig4_and", build_and, range(-1, 8), range(-2, 2)),
])
def test_footprints_match_figures(name, builder, xs, ys):
    assert builder().slice(0, xs, ys) == (FIX / "figures" / f"{name}.txt").read_text()


@pytest.mark.parametrize("name", ["fig1_wire", "fig3_diode_left", "fig3_diode_right"])
def test_after_images_match_figures(name):
    assert golden_slice(name) == (FIX / "figures" / f"{name}_after.txt").read_text()


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_golden_slices(name):
    assert golden_slice(name) == (FIX / "golden" / f"{name}.txt").read_text()


@pytest.mark.parametrize("name", sorted(ATLAS))
def test_fixture_files_match_builders(name):
    g = ATLAS[name]()
    f = read_fixture(FIX / "golden", name)
    assert f.footprint == g.footprint
    assert f.inputs == g.inputs and f.outputs == g.outputs


def test_wire_validation():
    with pytest.raises(GadgetError):
        build_wire([(0, 0, 0), (2, 0, 0)])
    with pytest.raises(GadgetError):
        build_wire([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)])
    with pytest.raises(GadgetError):
        # two bends one step apart
        build_wire([(0, 0, 0), (1, 0, 0), (1, 1, 0), (2, 1, 0), (3, 1, 0)])
    with pytest.raises(GadgetError):
        # U-turn: the empty site inside touches three wire sites
        build_wire([(0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 2, 0), (0, 2, 0)])


def test_single_site_wire():
    rep = verify_gadget(build_wire([(0, 0, 0)]), ["a"])
    assert rep.odometer == {(0, 0, 0): 1}


def test_wire_one_end_fires_other():
    rep = verify_gadget(build_wire([(x, 0, 0) for x in range(8)]), ["a"])
    assert rep.fired_outputs == {"b"} and not rep.backfired_inputs


def test_l_bend_deposit():
    path = [(x, 0, 0) for x in range(3)] + [(2, y, 0) for y in range(1, 4)]
    rep = verify_gadget(build_wire(path), ["a"])
    assert rep.fired_outputs == {"b"}
    assert rep.max_deposit <= 2


def test_branch_fires_all_arms():
    g = build_branch([(x, 0, 0) for x in range(4)],
                     [[(3, y, 0) for y in range(1, 4)], [(3, -y, 0) for y in range(1, 4)]])
    rep = verify_gadget(g, ["a"])
    assert rep.fired_outputs == {"b0", "b1"}
    assert rep.max_deposit <= 2


def test_diode_asymmetry():
    g = build_diode()
    rep = verify_gadget(g, ["in"])
    assert rep.odometer[g.outputs["out"]] == 1
    rep = verify_gadget(g, ["out"])
    assert rep.odometer.get(g.inputs["in"], 0) == 0
    assert rep.chips_at((1, 0, 0)) == 5
    assert verify_gadget(g, []).odometer == {}


def test_wait_gates():
    w2, w1 = build_wait2(), build_wait1()
    for a, b in combinations(["left", "right", "down"], 2):
        (third,) = {"left", "right", "down"} - {a, b}
        rep = verify_gadget(w2, [a, b])
        assert rep.odometer.get(w2.ports[third], 0) == 1
    rep = verify_gadget(w2, ["left"])
    assert rep.odometer.get(w2.ports["down"], 0) == 0
    assert rep.chips_at((0, 0, 0)) == 5
    rep = verify_gadget(w1, ["left"])
    assert rep.odometer[w1.ports["down"]] == 1 and rep.odometer[w1.ports["right"]] == 1


def test_and_back_fire_blocked():
    g = build_and(2)
    rep = verify_gadget(g, ["in0", "out"])
    assert rep.odometer.get(g.inputs["in1"], 0) == 0
    assert rep.odometer.get((6, 0, 0), 0) == 0
    assert rep.odometer.get((3, 0, 0), 0) == 1


def test_or_left_leaves_right_diode():
    g = build_or(2)
    rep = verify_gadget(g, ["in0"])
    assert rep.fired_outputs == {"out"}
    assert rep.odometer.get(g.inputs["in1"], 0) == 0
    assert rep.chips_at((5, 0, 0)) == 5


@pytest.mark.parametrize("k", [2, 3, 4])
def test_chained_truth_tables(k):
    for build, op in ((build_and, all), (build_or, any)):
        g = build(k)
        for fired in subsets(g.inputs):
            rep = verify_gadget(g, fired)
            want = op(p in fired for p in g.inputs)
            assert (rep.fired_outputs == {"out"}) == want, (g.name, fired)
            assert not rep.backfired_inputs
            assert rep.max_odometer <= 1
            assert rep.max_deposit <= 2


@pytest.mark.parametrize("name", sorted(ATLAS))
def test_deposit_is_one_away_from_junctions(name):
    g = ATLAS[name]()
    junctions = g.junctions()
    for fired in subsets(g.inputs):
        rep = verify_gadget(g, fired)
        for s, c in rep.chips.items():
            if s in g.footprint:
                continue
            # chebyshev distance: the inner corner of a bend is diagonal to it
            far = all(max(abs(a - b) for a, b in zip(s, j)) >= 2 for j in junctions)
            if far:
                assert c <= 1, (name, fired, s)


def test_fan_in_must_be_two():
    with pytest.raises(GadgetError):
        build_and(1)


def test_transform_preserves_behaviour():
    g = build_and(2)
    rot = [[0, -1, 0], [1, 0, 0], [0, 0, 1]]
    flip = [[1, 0, 0], [0, 0, 1], [0, 1, 0]]
    for m in (rot, flip):
        h = g.transform(m, (10, -3, 7))
        for fired in subsets(h.inputs):
            assert verify_gadget(h, fired).fired_outputs == verify_gadget(g, fired).fired_outputs
    with pytest.raises(GadgetError):
        g.transform([[2, 0, 0], [0, 1, 0], [0, 0, 1]])
