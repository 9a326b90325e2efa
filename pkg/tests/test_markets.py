import random
from fractions import Fraction
from pathlib import Path

import pytest

import markets as m
from fileformats import load_model
from msp_core import compute_w_ri, is_solvable
from polyhedron import Polyhedron, polar_cone
from rational import dot
from scenario import NodeId, ScenarioTree, node_mass

TESTS_DATA = Path(__file__).resolve().parent / "data"

F = Fraction
ROOT = NodeId(0, 0)
UP, DOWN = NodeId(1, 0), NodeId(1, 1)


def load(name):
    return load_model(TESTS_DATA / name)


# frictionless


def test_frictionless_price_systems():
    model = load("binomial.json")
    result = m.ftap(model)
    assert result.verdict == m.NO_ARBITRAGE
    assert result.arbitrage_free
    assert [ps.anchor for ps in result.price_systems] == [UP, DOWN]
    for ps in result.price_systems:
        assert ps.P.weights == {UP: F(1, 3), DOWN: F(2, 3)}
        assert m.check_price_system(model, ps).ok


def test_frictionless_arbitrage():
    model = load("binomial-arbitrage.json")
    result = m.frictionless_ftap(model)
    assert result.verdict == m.ARBITRAGE
    cert = result.certificate
    assert cert.failure == ROOT
    assert cert.strategy.h[ROOT][0] > 0
    assert dot(cert.separator, (1, ) + model.prices[ROOT]) <= 0
    assert all(dot(cert.separator, (1, ) + model.prices[c]) > 0 for c in (UP, DOWN))
    assert all(v > 0 for v in cert.payoffs.values())
    assert cert.witness in (UP, DOWN)
    assert m.check_certificate(model, cert).ok

    cert.payoffs[cert.witness] += 1
    report = m.check_certificate(model, cert)
    assert not report.ok
    assert report.violations[0].condition == "recorded payoffs match the replay"


def test_frictionless_constrained():
    model = load("decreasing.json")
    result = m.ftap(model)
    assert result.arbitrage_free
    for ps in result.price_systems:
        assert m.check_price_system(model, ps).ok
    with pytest.raises(m.Inadmissible):
        m.replay_frictionless(model, m.Strategy({ROOT: (F(-1), )}))
    payoffs = m.replay_frictionless(model, m.Strategy({ROOT: (F(1), )}, F(1)))
    assert payoffs == {UP: 0, DOWN: F(1, 2)}


def test_frictionless_model_checks():
    tree = ScenarioTree.from_branching([2])
    with pytest.raises(ValueError):
        m.FrictionlessModel(tree, {ROOT: (1, ), UP: (2, ), DOWN: (1, 1)})
    with pytest.raises(ValueError):
        m.ftap(load("binomial.json"), [NodeId(5, 0)])


# kabanov


def test_bid_ask_cone():
    model = load("bidask-overlap.json")
    assert m.bid_ask_cone(1, 2).same_set(model.K[ROOT])
    assert model.dim == 2


def test_kabanov_price_systems():
    model = load("bidask-overlap.json")
    result = m.kabanov_ftap(model)
    assert result.arbitrage_free
    assert result.robust_certified
    assert len(result.price_systems) == 2
    for ps in result.price_systems:
        assert node_mass(ps.Q, ps.anchor) > 0
        assert m.check_price_system(model, ps).ok


def test_kabanov_arbitrage():
    model = load("bidask-disjoint.json")
    result = m.ftap(model)
    assert result.verdict == m.ARBITRAGE
    cert = result.certificate
    assert cert.failure == ROOT
    holding = cert.terminal[cert.witness]
    assert any(holding)
    assert all(c >= 0 for c in holding)
    d = cert.decomposition
    for leaf in model.tree.leaves():
        assert d.k[leaf] == d.z
    assert [t for t, _ in d.by_level()] == [1]
    assert m.check_certificate(model, cert).ok

    cert.dominating = dict(model.K)
    assert not m.check_certificate(model, cert).ok


def test_blunting():
    K = m.bid_ask_cone(1, 2)
    K_hat = m.blunt_cone(K)
    assert m.dominates(K_hat, K)
    assert not m.dominates(K, K)
    assert not m.dominates(K, K_hat)


def test_dominating_model():
    model = load("bidask-overlap.json")
    result = m.kabanov_ftap(model, dominating=True)
    dom = result.dominating
    assert dom is not None
    for n in model.tree.nodes():
        assert m.dominates(dom.K[n], model.K[n])
    assert is_solvable(m.kabanov_to_msp(dom, check_efficient=False))


def test_free_disposal():
    tree = ScenarioTree.from_branching([1])
    half = Polyhedron.from_h(2, [((F(1), F(0)), F(0))])
    model = m.KabanovModel(tree, {ROOT: half, NodeId(1, 0): half})
    with pytest.raises(m.AssumptionViolated) as info:
        m.kabanov_ftap(model)
    assert info.value.node == ROOT


def test_efficient_friction():
    tree = ScenarioTree.from_branching([2])
    K = Polyhedron.from_h(2, [((F(1), F(1)), F(0))])
    model = m.KabanovModel(tree, {n: K for n in tree.nodes()},
                           {n: Polyhedron.orthant(2) for n in tree.nodes()})
    assert not m.efficient_friction_holds(model)
    with pytest.raises(m.AssumptionViolated):
        m.kabanov_to_msp(model)
    result = m.kabanov_ftap(model)
    assert result.arbitrage_free
    assert not result.robust_certified


# cost processes


def test_cost_function():
    f = m.CostFunction.bid_ask(2, 1)
    assert f((F(1), )) == 2
    assert f((F(-1), )) == -1
    assert f.is_homogeneous()
    assert m.CostFunction.linear([3])((F(2), )) == 6
    with pytest.raises(m.InvalidCost):
        m.CostFunction([((F(1), ), F(-1))])
    with pytest.raises(m.InvalidCost):
        m.CostFunction([])


def test_cost_horizon():
    model = load("cost-superlinear.json")
    f = model.S[ROOT]
    assert not f.is_homogeneous()
    assert f((F(1), )) == 1
    assert f((F(3), )) == 6
    assert f.horizon((F(1), )) == 3
    assert f.horizon((F(-1), )) == -1
    result = m.ftap(model)
    assert result.verdict == m.NO_ARBITRAGE


def test_round_trip_cost():
    tree = ScenarioTree.from_branching([1])
    S = {n: m.CostFunction.bid_ask(2, 1) for n in tree.nodes()}
    model = m.CostModel(tree, S)
    assert m.replay_cost(model, m.Strategy({ROOT: (F(1), )})) == {NodeId(1, 0): -1}
    with pytest.raises(m.Inadmissible):
        m.replay_cost(model, m.Strategy({NodeId(1, 0): (F(1), )}))


def test_cost_price_systems():
    model = load("cost-overlap.json")
    result = m.cost_ftap(model)
    assert result.arbitrage_free
    for ps in result.price_systems:
        assert m.check_price_system(model, ps).ok
        for n, price in ps.prices.items():
            slopes = [a[0] for a in model.S[n].slopes]
            assert min(slopes) < price[0] < max(slopes)


def test_cost_arbitrage():
    model = load("cost-disjoint.json")
    result = m.ftap(model)
    assert result.verdict == m.ARBITRAGE
    cert = result.certificate
    assert cert.failure == ROOT
    assert cert.payoffs[cert.witness] > 0
    assert all(v >= 0 for v in cert.payoffs.values())
    assert all(v >= 0 for v in cert.weak_payoffs.values())
    for f in cert.dominating_costs.values():
        assert f.is_homogeneous()
    assert m.check_certificate(model, cert).ok


def test_model_to_msp():
    for name in ("binomial.json", "bidask-overlap.json", "cost-overlap.json"):
        inst = m.model_to_msp(load(name))
        assert inst.conical
        assert is_solvable(inst)
    cm = load("cost-overlap.json")
    assert m.cost_to_msp(cm).dim == 2
    assert is_solvable(m.cost_to_msp(cm))


@pytest.mark.parametrize("name", ["binomial.json", "binomial-arbitrage.json"])
def test_linear_cost_matches_frictionless(name):
    fm = load(name)
    S = {n: m.CostFunction.linear(p) for n, p in fm.prices.items()}
    cm = m.CostModel(fm.tree, S)
    assert m.ftap(cm).verdict == m.ftap(fm).verdict


@pytest.mark.parametrize("name", ["cost-overlap.json", "cost-disjoint.json"])
def test_homogeneous_cost_matches_kabanov(name):
    cm = load(name)
    assert m.ftap(cm).verdict == m.ftap(m.induced_kabanov(cm)).verdict


# polar of the w sets


def random_kabanov(rng):
    tree = ScenarioTree.from_branching([rng.randint(1, 3) for _ in range(rng.randint(1, 2))])
    K, A = {}, {}
    for n in tree.nodes():
        bid = F(rng.randint(1, 6), 2)
        K[n] = m.bid_ask_cone(bid, bid + F(rng.randint(1, 4), 2))
        A[n] = rng.choice([
            Polyhedron.whole(2),
            Polyhedron.orthant(2),
            Polyhedron.from_h(2, [((0, 1), 0)]),
        ])
    return m.KabanovModel(tree, K, A)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(40))
def test_polar_of_w_random(seed):
    model = random_kabanov(random.Random(seed))
    table = compute_w_ri(m.kabanov_to_msp(model))
    for n in model.tree.nodes():
        if model.tree.is_leaf(n) or table.W[n].is_empty:
            continue
        Y = polar_cone(table.sharp[n].closure).intersect(model.A[n])
        assert polar_cone(table.W[n].closure).same_set(model.K[n].minkowski_sum(Y)), n
