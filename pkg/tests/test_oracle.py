import random
from fractions import Fraction
from pathlib import Path

import pytest

import oracle as m
from fileformats import load_model
from geometry import SemiOpenPolyhedron
from markets import frictionless_to_msp, replay_kabanov
from msp_core import MspInstance
from polyhedron import Polyhedron
from scenario import NodeId, ScenarioTree

TESTS_DATA = Path(__file__).resolve().parent / "data"

F = Fraction
ROOT = NodeId(0, 0)


def load(name):
    return load_model(TESTS_DATA / name)


def test_point_mass_cones():
    inst = load("point-masses-conical.json")
    verdicts = m.oracle_verdicts(inst)
    assert verdicts == {
        ROOT: True,
        NodeId(1, 0): True,
        NodeId(1, 1): False,
        NodeId(1, 2): False,
    }
    diff = m.compare_with_solver(inst)
    assert not diff.solver
    assert diff.agree
    assert diff.disagreements() == []


def test_binomial_agrees():
    inst = frictionless_to_msp(load("binomial.json"))
    diff = m.compare_with_solver(inst)
    assert diff.solver
    assert all(diff.oracle.values())
    assert diff.agree


def test_moment_program_shape():
    inst = load("point-masses-conical.json")
    program = m.MomentProgram(inst)
    assert program.nvars == 4 * 3
    assert program.m(NodeId(1, 0), 1) == program.q(NodeId(1, 0)) + 2
    x = program.maximal_support_point(frozenset())
    assert x[program.q(ROOT)] == 1


def test_not_conical():
    with pytest.raises(m.Unsupported):
        m.oracle_solvable(load("point-masses.json"), ROOT)


def test_caps(monkeypatch):
    inst = load("point-masses-conical.json")
    monkeypatch.setenv(m.CAP_ENV, "0,3,4")
    assert m.caps() == (0, 3, 4)
    with pytest.raises(m.Unsupported, match="levels"):
        m.oracle_solvable(inst, ROOT)
    monkeypatch.setenv(m.CAP_ENV, "1,2,4")
    with pytest.raises(m.Unsupported, match="branching"):
        m.oracle_verdicts(inst)
    monkeypatch.setenv(m.CAP_ENV, "1,3,1")
    with pytest.raises(m.Unsupported, match="dimension"):
        m.oracle_verdicts(inst)
    monkeypatch.setenv(m.CAP_ENV, "three")
    with pytest.raises(m.Unsupported):
        m.caps()
    monkeypatch.delenv(m.CAP_ENV)
    assert m.caps() == (m.MAX_LEVELS, m.MAX_BRANCHING, m.MAX_DIMENSION)


@pytest.mark.parametrize("name, arbitrage", [
    ("binomial.json", False),
    ("binomial-arbitrage.json", True),
    ("decreasing.json", False),
])
def test_frictionless_arbitrage(name, arbitrage):
    assert m.oracle_frictionless_arbitrage(load(name)) == arbitrage


def test_kabanov_arbitrage():
    assert not m.oracle_kabanov_arbitrage(load("bidask-overlap.json"))
    assert m.oracle_kabanov_arbitrage(load("bidask-overlap.json"), return_strategy=True) == (False, None)
    model = load("bidask-disjoint.json")
    found, strategy = m.oracle_kabanov_arbitrage(model, return_strategy=True)
    assert found
    terminal = replay_kabanov(model, strategy)
    assert any(any(h) for h in terminal.values())


# random corpus


def random_rays(rng, d, count):
    rays = []
    while len(rays) < count:
        r = tuple(F(rng.randint(-2, 2)) for _ in range(d))
        if any(r):
            rays.append(r)
    return rays


def random_cone(rng, d):
    P = Polyhedron.cone(d, rays=random_rays(rng, d, rng.randint(1, d)))
    kind = rng.choice(["open", "closed", "mixed"])
    if kind == "open":
        return SemiOpenPolyhedron.relatively_open(P)
    if kind == "closed":
        return SemiOpenPolyhedron.closed(P)
    # faces above a random choice of nonzero faces
    proper = [G for G in P.faces() if P.face_dimension(G) >= 1 and G != P.top_face]
    chosen = [G for G in proper if rng.random() < 0.5]
    flags = {G: G == P.top_face or any(G <= S for S in chosen) for G in P.faces()}
    return SemiOpenPolyhedron.from_flags(P, flags)


def random_drift(rng, d):
    if rng.random() < 0.5:
        return Polyhedron.origin(d)
    return Polyhedron.cone(d, rays=random_rays(rng, d, 1))


def random_instance(rng, d=2, levels=2, branching=3):
    tree = ScenarioTree.from_branching(
        [rng.randint(1, branching) for _ in range(rng.randint(1, levels))])
    V = {n: random_cone(rng, d) for n in tree.nodes()}
    C = {n: random_drift(rng, d) for n in tree.nodes() if not tree.is_leaf(n)}
    return MspInstance(tree, V, C, d, conical=True)


@pytest.mark.slow
def test_random_corpus():
    rng = random.Random(20)
    solvable = 0
    for _ in range(500):
        inst = random_instance(rng)
        diff = m.compare_with_solver(inst)
        assert diff.agree, diff.disagreements()
        solvable += diff.solver
    assert 0 < solvable < 500


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(40))
def test_random_deep_corpus(seed):
    rng = random.Random(seed)
    inst = random_instance(rng, d=rng.randint(2, 3), levels=3, branching=2)
    diff = m.compare_with_solver(inst)
    assert diff.agree, diff.disagreements()
