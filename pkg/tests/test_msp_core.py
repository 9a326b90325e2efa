import random
from fractions import Fraction
from pathlib import Path

import pytest

import msp_core as m
from fileformats import load_model
from geometry import SemiOpenPolyhedron
from markets import frictionless_to_msp
from polyhedron import NotACone, Polyhedron
from scenario import NodeId, ScenarioTree, node_mass

TESTS_DATA = Path(__file__).resolve().parent / "data"

F = Fraction
ROOT = NodeId(0, 0)


def interval(lo, hi):
    P = Polyhedron.from_v(1, points=[(F(lo), ), (F(hi), )])
    return SemiOpenPolyhedron.relatively_open(P)


@pytest.fixture
def point_masses():
    return load_model(TESTS_DATA / "point-masses.json")


@pytest.fixture
def drift():
    return load_model(TESTS_DATA / "drift.json")


@pytest.fixture
def binomial():
    return frictionless_to_msp(load_model(TESTS_DATA / "binomial.json"))


def test_instance_checks():
    tree = ScenarioTree.from_branching([1])
    with pytest.raises(ValueError, match="V undefined"):
        m.MspInstance(tree, {ROOT: interval(0, 1)}, {}, 1)
    inst = m.MspInstance(tree, {ROOT: interval(0, 1), NodeId(1, 0): interval(0, 1)}, {}, 1)
    assert inst.C[ROOT].same_set(Polyhedron.origin(1))
    with pytest.raises(NotACone):
        m.MspInstance(tree, {ROOT: interval(0, 1), NodeId(1, 0): interval(0, 1)}, {}, 1,
                      conical=True)


def test_unsolvable_point_masses(point_masses):
    table = m.compute_W(point_masses)
    unit = Polyhedron.from_v(1, points=[(F(0), ), (F(1), )])
    assert table.sharp[ROOT].same_set(SemiOpenPolyhedron.closed(unit))
    assert table.flat[ROOT].same_set(SemiOpenPolyhedron.relatively_open(unit))
    assert table.W[ROOT].is_empty
    for leaf in point_masses.tree.leaves():
        assert not table.W[leaf].is_empty
    assert not m.is_solvable(point_masses, table)
    assert m.find_failure(point_masses, table) == (0, ROOT)
    with pytest.raises(m.Unsolvable) as info:
        m.build_local_solution(point_masses, NodeId(1, 1), table=table)
    assert info.value.level == 0
    assert info.value.node == ROOT


def test_W_with_drift(drift):
    table = m.compute_W(drift)
    W1 = table.W[NodeId(1, 0)]
    assert W1.member((0, 0))
    assert W1.member((0, F(-1, 2)))
    assert W1.member((F(9, 10), 0))
    assert not W1.member((0, F(1, 2)))
    assert not W1.member((0, -1))
    assert not W1.member((1, 0))
    W0 = table.W[ROOT]
    segment = Polyhedron.from_v(2, points=[(F(-1), F(0)), (F(1), F(0))])
    assert W0.same_set(SemiOpenPolyhedron.relatively_open(segment))
    assert W0.member((0, 0))
    assert not W0.member((1, 0))
    assert not W0.member((0, F(-1, 2)))
    assert m.is_solvable(drift, table)
    assert m.find_failure(drift, table) is None


def test_local_solution_with_drift(drift):
    s = m.build_local_solution(drift, NodeId(2, 0), start=(0, 0))
    assert s.xi[ROOT] == (0, 0)
    assert s.xi[NodeId(1, 0)] == (0, 0)
    assert s.xi[NodeId(2, 0)][1] == 0
    assert m.verify_solution(drift, s).ok
    with pytest.raises(m.InvalidStart):
        m.build_local_solution(drift, NodeId(2, 0), start=(1, 0))
    with pytest.raises(m.InvalidStart):
        m.build_local_solution(drift, NodeId(2, 0), start=(0, F(-1, 2)))


@pytest.mark.parametrize("placement, contains_origin", [
    ("difference", False),
    ("hull", True),
])
def test_w_ri(drift, placement, contains_origin):
    table = m.compute_w_ri(drift, placement)
    assert table.W[NodeId(1, 0)].member((0, 0)) == contains_origin
    assert table.W[NodeId(1, 0)].member((0, F(-1, 2)))
    assert table.W[ROOT].is_empty


def test_bad_modes(drift):
    with pytest.raises(ValueError):
        m.compute_W(drift, flat_mode="round")
    with pytest.raises(ValueError):
        m.compute_w_ri(drift, "between")


def test_sharp_mode_for_open_sets():
    tree = ScenarioTree.from_branching([2, 2])
    bounds = {
        NodeId(0, 0): (-5, 5),
        NodeId(1, 0): (0, 2),
        NodeId(1, 1): (1, 4),
        NodeId(2, 0): (-1, 1),
        NodeId(2, 1): (F(1, 2), 3),
        NodeId(2, 2): (2, 6),
        NodeId(2, 3): (-2, 0),
    }
    inst = m.MspInstance(tree, {n: interval(*b) for n, b in bounds.items()}, {}, 1)
    with_flat = m.compute_W(inst)
    with_sharp = m.compute_W(inst, flat_mode="sharp")
    for n in tree.nodes():
        assert with_flat.W[n].same_set(with_sharp.W[n])
    assert with_flat.W[NodeId(1, 0)].same_set(interval(0, 2))
    assert with_flat.W[NodeId(1, 1)].same_set(interval(1, 4))
    assert with_flat.W[ROOT].same_set(interval(0, 4))


def test_subtree_recursion(drift):
    full = m.compute_W(drift)
    part = m.compute_W(drift, root=NodeId(1, 0))
    assert set(part.W) == {NodeId(1, 0), NodeId(2, 0)}
    assert part.W[NodeId(1, 0)].same_set(full.W[NodeId(1, 0)])


def test_binomial_solutions(binomial):
    table = m.compute_W(binomial)
    for leaf in binomial.tree.leaves():
        s = m.build_local_solution(binomial, leaf, table=table)
        assert s.anchor == leaf
        assert node_mass(s.Q, leaf) > 0
        assert m.verify_solution(binomial, s).ok
        assert m.solution_in_W(table, s)


def test_mix_solutions(binomial):
    s1 = m.build_local_solution(binomial, NodeId(1, 0))
    s2 = m.build_local_solution(binomial, NodeId(1, 1))
    mixed = m.mix_solutions(s1, s2, F(1, 3))
    assert m.verify_solution(binomial, mixed).ok
    assert all(node_mass(mixed.Q, leaf) > 0 for leaf in binomial.tree.leaves())
    with pytest.raises(ValueError):
        m.mix_solutions(s1, s2, 1)


def test_mix_mismatch(binomial, drift):
    s1 = m.build_local_solution(binomial, NodeId(1, 0))
    s2 = m.build_local_solution(drift, NodeId(2, 0))
    with pytest.raises(m.Mismatch):
        m.mix_solutions(s1, s2, F(1, 2))


def test_verify_detects_tampering(binomial):
    s = m.build_local_solution(binomial, NodeId(1, 0))
    leaf = NodeId(1, 0)
    s.xi[leaf] = tuple(2 * c for c in s.xi[leaf])
    report = m.verify_solution(binomial, s)
    assert not report.ok
    assert [v.condition for v in report.violations] == ["drift in C"]
    assert report.violations[0].node == ROOT

    s = m.build_local_solution(binomial, NodeId(1, 0))
    s.xi[ROOT] = (F(1), F(2))
    report = m.verify_solution(binomial, s)
    assert "xi in V" in [v.condition for v in report.violations]
    assert not report


# random corpus


def random_ray(rng):
    while True:
        r = (F(rng.randint(-2, 2)), F(rng.randint(-2, 2)))
        if any(r):
            return r


def random_instance(rng, kinds=("open", "closed")):
    tree = ScenarioTree.from_branching([rng.randint(1, 3) for _ in range(rng.randint(1, 3))])
    V, C = {}, {}
    for n in tree.nodes():
        P = Polyhedron.cone(2, rays=[random_ray(rng) for _ in range(rng.randint(1, 2))])
        if rng.choice(kinds) == "open":
            V[n] = SemiOpenPolyhedron.relatively_open(P)
        else:
            V[n] = SemiOpenPolyhedron.closed(P)
        if not tree.is_leaf(n) and rng.random() < 0.5:
            C[n] = Polyhedron.cone(2, rays=[random_ray(rng)])
    return m.MspInstance(tree, V, C, 2)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(60))
def test_w_ri_inside_W_random(seed):
    inst = random_instance(random.Random(seed))
    table = m.compute_W(inst)
    for placement in m.RI_PLACEMENTS:
        w = m.compute_w_ri(inst, placement)
        for n in inst.tree.nodes():
            assert w.W[n].subset_of(table.W[n]), (placement, n)


def test_w_ri_empty_child():
    tree = ScenarioTree.from_branching([2])
    empty = SemiOpenPolyhedron.empty(1)
    V = {ROOT: interval(-1, 1), NodeId(1, 0): interval(0, 1), NodeId(1, 1): empty}
    inst = m.MspInstance(tree, V, {}, 1)
    assert m.compute_W(inst).W[ROOT].is_empty
    for placement in m.RI_PLACEMENTS:
        assert m.compute_w_ri(inst, placement).W[ROOT].is_empty


@pytest.mark.slow
@pytest.mark.parametrize("kinds", [("open", "closed"), ("open", )])
@pytest.mark.parametrize("seed", range(30))
def test_random_solutions(seed, kinds):
    rng = random.Random(seed)
    inst = random_instance(rng, kinds)
    table = m.compute_W(inst)
    if not m.is_solvable(inst, table):
        _, node = m.find_failure(inst, table)
        assert table.W[node].is_empty
        with pytest.raises(m.Unsolvable):
            m.build_local_solution(inst, inst.tree.leaves()[0], table=table)
        return
    leaves = inst.tree.leaves()
    anchors = rng.sample(leaves, min(3, len(leaves)))
    solutions = [m.build_local_solution(inst, a, table=table) for a in anchors]
    for a, s in zip(anchors, solutions):
        assert node_mass(s.Q, a) > 0
        assert m.verify_solution(inst, s).ok
        assert m.solution_in_W(table, s)
    mixed = solutions[0]
    for s in solutions[1:]:
        mixed = m.mix_solutions(mixed, s, F(1, 3))
    assert m.verify_solution(inst, mixed).ok
    assert m.solution_in_W(table, mixed)
    assert all(node_mass(mixed.Q, a) > 0 for a in anchors)
