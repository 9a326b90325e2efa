'''
Market models on scenario trees and their no-arbitrage verdicts.

Distributed under the terms of the GNU General Public License v2 or later

Three models translate into martingale selection problems:

    frictionless   prices S, trading constraints A
    kabanov        solvency cones K, trading constraints A
    cost           convex max-affine cost functions S, trading constraints A

Each *_ftap runner solves the problem and returns either price systems (one
per queried node, every one charging that node) or an arbitrage certificate
whose strategy is replayed exactly before it is returned.
'''

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import (
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from geometry import (
    HardError,
    SemiOpenPolyhedron,
    relatively_open,
    sample_ri_point,
    separate_cones,
)
from msp_core import (
    MspInstance,
    Solution,
    Unsolvable,
    VerificationReport,
    WTable,
    build_local_solution,
    compute_W,
    compute_w_ri,
    find_failure,
    is_solvable,
    verify_solution,
)
from polyhedron import NotACone, NotMember, Polyhedron, lp_maximize, polar_cone
from rational import (
    Vector,
    add,
    dot,
    fmt_vector,
    neg,
    nullspace,
    scale,
    sub,
    unit,
    vector,
    zeros,
)
from scenario import FiniteMeasure, NodeId, ScenarioTree, node_mass

logger = logging.getLogger(__name__)

BLUNTING_EPSILON = Fraction(1, 100)
# closed unit ball used to cut cones to polytopes; the max-norm keeps it polyhedral
UNIT_BALL = 'max'
WITNESS_MAX_EXPONENT = 40
DOMINATION_MAX_INDEX = 2**20
SCALING_CHECKS = (1, 2, 10)

NO_ARBITRAGE = 'no-arbitrage'
ARBITRAGE = 'arbitrage'


class AssumptionViolated(ValueError):

    def __init__(self, which: str, node: NodeId):
        super().__init__(f'assumption "{which}" fails at node {node}')
        self.which = which
        self.node = node


class NotInPolar(ValueError):
    pass


class InvalidCost(ValueError):
    pass


class Inadmissible(ValueError):

    def __init__(self, node: NodeId, reason: str):
        super().__init__(f'strategy inadmissible at node {node}: {reason}')
        self.node = node
        self.reason = reason


def _node_map(tree: ScenarioTree, values, default, what: str) -> Dict[NodeId, object]:
    out = {}
    for n in tree.nodes():
        if n in values:
            out[n] = values[n]
        elif default is not None:
            out[n] = default
        else:
            raise ValueError(f'{what} undefined at node {n}')
    return out


def _check_cones(family: Dict[NodeId, Polyhedron], what: str, d: int):
    for n, P in family.items():
        if P.dim != d:
            raise ValueError(f'{what} at node {n} has dimension {P.dim}, expected {d}')
        if not P.is_cone:
            raise NotACone(f'{what} at node {n} is not a cone')


def _is_whole(P: Polyhedron) -> bool:
    return not P.is_empty and not P.inequalities and not P.equalities


# models


@dataclass
class FrictionlessModel:
    tree: ScenarioTree
    prices: Dict[NodeId, Vector]
    A: Dict[NodeId, Polyhedron] = field(default_factory=dict)

    def __post_init__(self):
        self.prices = _node_map(self.tree, self.prices, None, 'price')
        d = len(self.prices[self.tree.root])
        if any(len(s) != d for s in self.prices.values()):
            raise ValueError('price vectors of different lengths')
        self.A = _node_map(self.tree, self.A, Polyhedron.whole(d), 'A')
        _check_cones(self.A, 'A', d)

    @property
    def assets(self) -> int:
        return len(self.prices[self.tree.root])


@dataclass
class KabanovModel:
    tree: ScenarioTree
    K: Dict[NodeId, Polyhedron]
    A: Dict[NodeId, Polyhedron] = field(default_factory=dict)

    def __post_init__(self):
        self.K = _node_map(self.tree, self.K, None, 'K')
        d = self.K[self.tree.root].dim
        _check_cones(self.K, 'K', d)
        self.A = _node_map(self.tree, self.A, Polyhedron.whole(d), 'A')
        _check_cones(self.A, 'A', d)

    @property
    def dim(self) -> int:
        return self.K[self.tree.root].dim


@dataclass
class CostFunction:
    '''S(x) = max_i <slope_i, x> + intercept_i with S(0) = 0'''
    pieces: List[Tuple[Vector, Fraction]]

    def __post_init__(self):
        if not self.pieces:
            raise InvalidCost('cost function without pieces')
        self.pieces = [(vector(a), Fraction(b)) for a, b in self.pieces]
        d = len(self.pieces[0][0])
        if any(len(a) != d for a, _ in self.pieces):
            raise InvalidCost('slopes of different lengths')
        top = max(b for _, b in self.pieces)
        if top != 0:
            raise InvalidCost(f'S(0) = {top}, expected 0')

    @classmethod
    def linear(cls, s: Sequence) -> 'CostFunction':
        return cls([(vector(s), Fraction(0))])

    @classmethod
    def bid_ask(cls, ask, bid) -> 'CostFunction':
        '''One asset bought at ask and sold at bid'''
        return cls([(vector([ask]), Fraction(0)), (vector([bid]), Fraction(0))])

    @property
    def dim(self) -> int:
        return len(self.pieces[0][0])

    @property
    def slopes(self) -> List[Vector]:
        return [a for a, _ in self.pieces]

    def __call__(self, x: Sequence[Fraction]) -> Fraction:
        return max(dot(a, x) + b for a, b in self.pieces)

    def horizon(self, x: Sequence[Fraction]) -> Fraction:
        '''Recession function lim S(alpha x) / alpha'''
        return max(dot(a, x) for a, _ in self.pieces)

    def is_homogeneous(self) -> bool:
        return all(b == 0 for _, b in self.pieces)


@dataclass
class CostModel:
    tree: ScenarioTree
    S: Dict[NodeId, CostFunction]
    A: Dict[NodeId, Polyhedron] = field(default_factory=dict)

    def __post_init__(self):
        self.S = _node_map(self.tree, self.S, None, 'S')
        d = self.S[self.tree.root].dim
        if any(f.dim != d for f in self.S.values()):
            raise InvalidCost('cost functions of different dimensions')
        self.A = _node_map(self.tree, self.A, Polyhedron.whole(d), 'A')
        _check_cones(self.A, 'A', d)

    @property
    def assets(self) -> int:
        return self.S[self.tree.root].dim


Model = Union[FrictionlessModel, KabanovModel, CostModel]


# results


@dataclass
class Strategy:
    h: Dict[NodeId, Vector]
    initial: Fraction = Fraction(0)
    model: str = ''

    def scaled(self, alpha) -> 'Strategy':
        alpha = Fraction(alpha)
        return Strategy({n: scale(alpha, v) for n, v in self.h.items()},
                        alpha * self.initial, self.model)

    def at(self, n: NodeId, d: int) -> Vector:
        return self.h.get(n, zeros(d))


@dataclass
class PriceSystem:
    xi: Dict[NodeId, Vector]
    Q: FiniteMeasure
    anchor: NodeId
    P: Optional[FiniteMeasure] = None
    prices: Optional[Dict[NodeId, Vector]] = None

    @property
    def solution(self) -> Solution:
        return Solution(self.xi, self.Q, self.anchor)


@dataclass
class Decomposition:
    '''
    z at the failure node split as k(child) + rest(child) down to the
    leaves, so that k sums to z along every path below the failure node.
    k at the failure node itself is -z.
    '''
    root: NodeId
    z: Vector
    k: Dict[NodeId, Vector]
    rest: Dict[NodeId, Vector]
    slack: List[NodeId] = field(default_factory=list)

    def by_level(self) -> List[Tuple[int, Dict[NodeId, Vector]]]:
        levels = sorted({n.level for n in self.k if n != self.root})
        return [(t, {n: v for n, v in sorted(self.k.items()) if n.level == t and n != self.root})
                for t in levels]


@dataclass
class ArbitrageCertificate:
    strategy: Strategy
    witness: NodeId
    failure: NodeId
    separator: Vector
    payoffs: Dict[NodeId, Fraction] = field(default_factory=dict)
    terminal: Dict[NodeId, Vector] = field(default_factory=dict)
    decomposition: Optional[Decomposition] = None
    dominating: Optional[Dict[NodeId, Polyhedron]] = None
    dominating_costs: Optional[Dict[NodeId, CostFunction]] = None
    strict_side: Optional[str] = None
    weak_payoffs: Dict[NodeId, Fraction] = field(default_factory=dict)


@dataclass
class FtapResult:
    verdict: str
    price_systems: List[PriceSystem] = field(default_factory=list)
    certificate: Optional[ArbitrageCertificate] = None
    dominating: Optional[KabanovModel] = None
    robust_certified: bool = True
    table: Optional[WTable] = None

    @property
    def arbitrage_free(self) -> bool:
        return self.verdict == NO_ARBITRAGE


def _queried(tree: ScenarioTree, nodes: Optional[Sequence[NodeId]]) -> List[NodeId]:
    if nodes is None:
        return tree.leaves()
    out = []
    for n in nodes:
        n = NodeId(*n)
        if n not in tree:
            raise ValueError(f'no node {n} in this tree')
        out.append(n)
    return out


def _density_measure(tree: ScenarioTree, sol: Solution) -> FiniteMeasure:
    '''Reweight Q by the first coordinate of xi on the leaves'''
    mass = {leaf: w * sol.xi[leaf][0] for leaf, w in sol.Q.weights.items()}
    total = sum(mass.values())
    return FiniteMeasure(tree, {leaf: v / total for leaf, v in mass.items()})


def _first_positive(values: Dict[NodeId, Fraction],
                    among: Optional[Sequence[NodeId]] = None) -> Optional[NodeId]:
    for n in sorted(values):
        if among is not None and n not in among:
            continue
        if values[n] > 0:
            return n
    return None


# frictionless


def frictionless_to_msp(m: FrictionlessModel) -> MspInstance:
    d1 = m.assets + 1
    V, C = {}, {}
    for n in m.tree.nodes():
        V[n] = relatively_open(Polyhedron.cone(d1, rays=[(Fraction(1), ) + m.prices[n]]))
        C[n] = Polyhedron.origin(1).product(polar_cone(m.A[n]).negate())
    return MspInstance(m.tree, V, C, d1, conical=True)


def replay_frictionless(m: FrictionlessModel, s: Strategy) -> Dict[NodeId, Fraction]:
    '''Terminal value initial + sum <h_t, S_{t+1} - S_t> per leaf'''
    d = m.assets
    tree = m.tree
    for n, h in s.h.items():
        if n not in tree:
            raise Inadmissible(n, 'no such node')
        if not tree.is_leaf(n) and not m.A[n].contains(h):
            raise Inadmissible(n, f'holding {fmt_vector(h)} outside A')
    out = {}
    for leaf in tree.leaves():
        path = tree.path(leaf)
        value = Fraction(s.initial)
        for u, nxt in zip(path, path[1:]):
            value += dot(s.at(u, d), sub(m.prices[nxt], m.prices[u]))
        out[leaf] = value
    return out


def check_frictionless_price_system(m: FrictionlessModel, ps: PriceSystem) -> VerificationReport:
    report = verify_solution(frictionless_to_msp(m), ps.solution)
    if ps.P is None:
        report.add(ps.anchor, 'pricing measure', 'missing')
        return report
    if ps.P.tree is not m.tree or ps.P != _density_measure(m.tree, ps.solution):
        report.add(ps.anchor, 'pricing measure', 'does not match the density of xi')
        return report
    if node_mass(ps.P, ps.anchor) <= 0:
        report.add(ps.anchor, 'anchor', 'has zero pricing mass')
    for n in m.tree.nodes():
        mass = node_mass(ps.P, n)
        if m.tree.is_leaf(n) or mass == 0:
            continue
        expected = zeros(m.assets)
        for c in m.tree.children(n):
            expected = add(expected, scale(node_mass(ps.P, c) / mass, m.prices[c]))
        drift = sub(expected, m.prices[n])
        if not polar_cone(m.A[n]).contains(neg(drift)):
            report.add(n, 'price drift in -A*', fmt_vector(drift))
    return report


def frictionless_ftap(m: FrictionlessModel,
                      nodes: Optional[Sequence[NodeId]] = None) -> FtapResult:
    inst = frictionless_to_msp(m)
    table = compute_W(inst)
    if is_solvable(inst, table):
        systems = []
        for n in _queried(m.tree, nodes):
            sol = build_local_solution(inst, n, table=table)
            ps = PriceSystem(sol.xi, sol.Q, n, P=_density_measure(m.tree, sol))
            report = check_frictionless_price_system(m, ps)
            if not report:
                raise HardError(f'price system at {n} fails: {report.violations[0]}')
            systems.append(ps)
        logger.info('frictionless model is arbitrage free')
        return FtapResult(NO_ARBITRAGE, systems, table=table)
    _, n = find_failure(inst, table)
    z = separate_cones(inst.V[n], table.target[n], emphasis=[table.sharp[n].closure])
    strategy = Strategy({n: z[1:]}, Fraction(0), 'frictionless')
    payoffs = replay_frictionless(m, strategy)
    witness = _first_positive(payoffs)
    if witness is None or any(v < 0 for v in payoffs.values()):
        raise HardError(f'separator at {n} does not produce an arbitrage')
    logger.info('arbitrage at node %s, witness leaf %s', n, witness)
    cert = ArbitrageCertificate(strategy, witness, n, z, payoffs=payoffs)
    return FtapResult(ARBITRAGE, certificate=cert, table=table)


# kabanov


def _positive_point(A: Polyhedron) -> Optional[Vector]:
    '''A point of A with nonnegative coordinates summing to one'''
    d = A.dim
    ineqs = list(A.inequalities) + [(unit(d, i), Fraction(0)) for i in range(d)]
    eqs = list(A.equalities) + [((Fraction(1), ) * d, Fraction(1))]
    res = lp_maximize(d, zeros(d), ineqs, eqs)
    return res.solution if res.optimal else None


def _free_disposal_failure(m: KabanovModel) -> Optional[Tuple[str, NodeId]]:
    for n in m.tree.nodes():
        K = m.K[n]
        if K.equalities or any(any(c <= 0 for c in a) for a, _ in K.inequalities):
            return 'free disposal: int K contains the nonzero positive orthant', n
        if _positive_point(m.A[n]) is None:
            return 'free disposal: A meets the nonzero positive orthant', n
    return None


def efficient_friction_holds(m: KabanovModel) -> bool:
    '''K pointed at every node, required only when trading is constrained'''
    if all(_is_whole(A) for A in m.A.values()):
        return True
    return all(not K.lines for K in m.K.values())


def check_assumptions(m: KabanovModel, efficient: bool = True):
    failure = _free_disposal_failure(m)
    if failure is not None:
        raise AssumptionViolated(*failure)
    if efficient and not efficient_friction_holds(m):
        node = next(n for n in m.tree.nodes() if m.K[n].lines)
        raise AssumptionViolated('efficient friction: K intersect -K = {0}', node)


def kabanov_to_msp(m: KabanovModel, check_efficient: bool = True) -> MspInstance:
    check_assumptions(m, efficient=check_efficient)
    V = {n: relatively_open(polar_cone(m.K[n])) for n in m.tree.nodes()}
    C = {n: polar_cone(m.A[n]).negate() for n in m.tree.nodes()}
    return MspInstance(m.tree, V, C, m.dim, conical=True)


def _in_lineality(K: Polyhedron, k: Sequence[Fraction]) -> bool:
    return K.contains(k) and K.contains(neg(k))


def _split(zp: Vector, K: Polyhedron, Y: Polyhedron) -> Vector:
    '''k in K with zp - k in Y, pushed into the interior of K when possible'''
    d = K.dim
    ext = lambda a, t: tuple(a) + (Fraction(t), )
    ineqs = [(ext(a, -1), b) for a, b in K.inequalities]
    ineqs += [(ext(neg(c), 0), e - dot(c, zp)) for c, e in Y.inequalities]
    ineqs.append((ext(zeros(d), -1), Fraction(-1)))
    eqs = [(ext(a, 0), b) for a, b in K.equalities]
    eqs += [(ext(neg(c), 0), e - dot(c, zp)) for c, e in Y.equalities]
    res = lp_maximize(d + 1, ext(zeros(d), 1), ineqs, eqs)
    if not res.optimal:
        raise NotInPolar(f'{fmt_vector(zp)} does not split into K plus the polar part')
    return res.solution[:d]


def decompose_z(m: KabanovModel, z: Sequence[Fraction], node: NodeId,
                w_table: WTable) -> Decomposition:
    '''
    Split the separator z at the failure node into k(u) in K(u) over the
    subtree, using w*(c) = K(c) + (polar of cl sharp w at c) intersect A(c).
    '''
    tree = m.tree
    z = vector(z)
    if not m.A[node].contains(z):
        raise NotInPolar(f'{fmt_vector(z)} not in A at the failure node {node}')
    if not m.K[node].contains(neg(z)):
        raise NotInPolar(f'-z not in K at the failure node {node}')
    k = {node: neg(z)}
    rest = {node: z}
    queue = [node]
    for u in queue:
        for c in tree.children(u):
            zp = rest[u]
            if tree.is_leaf(c):
                if not m.K[c].contains(zp):
                    raise NotInPolar(f'{fmt_vector(zp)} not in K at leaf {c}')
                k[c], rest[c] = zp, zeros(m.dim)
                continue
            hull = w_table.sharp[c].closure
            if hull.is_empty:
                raise NotInPolar(f'w is empty below the failure node at {c}')
            Y = polar_cone(hull).intersect(m.A[c])
            k[c] = _split(zp, m.K[c], Y)
            rest[c] = sub(zp, k[c])
            queue.append(c)
    slack = sorted(u for u in k if not _in_lineality(m.K[u], k[u]))
    logger.debug('decomposition below %s has slack at %s', node, [str(u) for u in slack])
    return Decomposition(node, z, k, rest, slack)


def blunt_cone(K: Polyhedron, epsilon: Fraction = BLUNTING_EPSILON) -> Polyhedron:
    '''
    Slightly larger cone: every nonzero vertex p of K cut to the unit box,
    orthogonal to the lineality space, is replaced by p +- epsilon*b over a
    basis b of that orthogonal complement.
    '''
    d = K.dim
    lines = list(K.lines)
    basis = nullspace(lines, d)
    pointed = K.intersect(Polyhedron.from_h(d, [], [(v, 0) for v in lines])) if lines else K
    cut = pointed.intersect(Polyhedron.box(d))
    vertices = [p for p in cut.points if any(p)]
    if not vertices:
        return K
    gens = [add(p, scale(sign * epsilon, b)) for p in vertices for b in basis for sign in (1, -1)]
    return Polyhedron.cone(d, rays=gens, lines=lines)


def dominates(K_hat: Polyhedron, K: Polyhedron) -> bool:
    '''K is inside K_hat and K minus its lineality space lies in ri K_hat'''
    if not K_hat.contains_polyhedron(K):
        return False
    return all(dot(a, r) > 0 for r in K.rays for a, _ in K_hat.inequalities)


def _shift(A: Polyhedron, K_hat: Polyhedron, k: Vector) -> Optional[Vector]:
    d = A.dim
    candidates = [unit(d, i) for i in range(d) if A.contains(unit(d, i))]
    p = _positive_point(A)
    if p is not None:
        candidates.append(p)
    for j in range(WITNESS_MAX_EXPONENT + 1):
        for c in candidates:
            x = scale(Fraction(1, 2**j), c)
            if K_hat.contains(sub(k, x)):
                return x
    return None


def assemble_arbitrage(m: KabanovModel, decomposition: Decomposition,
                       K_hat: Dict[NodeId, Polyhedron]) -> Tuple[Strategy, NodeId]:
    '''
    Start from the zero-terminal strategy of the decomposition and push the
    slack of the first interior increment forward to a leaf, where it ends
    as a nonzero positive holding.
    '''
    tree = m.tree
    d = m.dim
    h = dict(decomposition.rest)
    k_hat = dict(decomposition.k)
    start = next((u for u in sorted(k_hat) if K_hat[u].in_interior(k_hat[u])), None)
    if start is None:
        raise HardError('no increment of the decomposition is interior to the dominating cone')
    cur = start
    while True:
        x = _shift(m.A[cur], K_hat[cur], k_hat[cur])
        if x is None:
            raise AssumptionViolated('free disposal: no positive shift found', cur)
        h[cur] = add(h.get(cur, zeros(d)), x)
        k_hat[cur] = sub(k_hat[cur], x)
        for c in tree.children(cur):
            k_hat[c] = add(k_hat.get(c, zeros(d)), x)
        if tree.is_leaf(cur):
            break
        cur = tree.children(cur)[0]
    logger.info('slack at %s pushed to leaf %s', start, cur)
    return Strategy(h, Fraction(0), 'kabanov'), cur


def replay_kabanov(m: KabanovModel, s: Strategy,
                   K: Optional[Dict[NodeId, Polyhedron]] = None) -> Dict[NodeId, Vector]:
    '''Check holdings in A and increments in -K; returns terminal holdings'''
    tree = m.tree
    d = m.dim
    K = m.K if K is None else K
    for n in tree.nodes():
        h = s.at(n, d)
        if not m.A[n].contains(h):
            raise Inadmissible(n, f'holding {fmt_vector(h)} outside A')
        parent = tree.parent(n)
        before = zeros(d) if parent is None else s.at(parent, d)
        if not K[n].contains(sub(before, h)):
            raise Inadmissible(n, 'increment outside -K')
    out = {}
    for leaf in tree.leaves():
        h = s.at(leaf, d)
        if any(c < 0 for c in h):
            raise Inadmissible(leaf, f'terminal holding {fmt_vector(h)} not nonnegative')
        out[leaf] = h
    return out


def _price_systems(inst: MspInstance, table: WTable, tree: ScenarioTree,
                   nodes: Optional[Sequence[NodeId]], priced: bool) -> List[PriceSystem]:
    systems = []
    for n in _queried(tree, nodes):
        sol = build_local_solution(inst, n, table=table)
        ps = PriceSystem(sol.xi, sol.Q, n)
        if priced:
            ps.P = _density_measure(tree, sol)
            ps.prices = {u: scale(1 / x[0], x[1:]) for u, x in sol.xi.items()}
        report = verify_solution(inst, sol)
        if not report:
            raise HardError(f'price system at {n} fails: {report.violations[0]}')
        systems.append(ps)
    return systems


def _separate_and_decompose(m: KabanovModel, inst: MspInstance):
    w_table = compute_w_ri(inst, 'difference')
    failure = find_failure(inst, w_table)
    if failure is None:
        raise HardError('W is empty somewhere but the relative-interior table is not')
    _, n = failure
    V = inst.V[n]
    z = separate_cones(V, w_table.target[n])
    strict_side = 'V' if any(dot(g, z) < 0 for g in V.closure.rays) else 'hull'
    decomposition = decompose_z(m, z, n, w_table)
    return n, z, strict_side, decomposition


def kabanov_certificate(m: KabanovModel, inst: MspInstance) -> ArbitrageCertificate:
    n, z, strict_side, decomposition = _separate_and_decompose(m, inst)
    K_hat = {u: blunt_cone(m.K[u]) for u in m.tree.nodes()}
    for u, P in K_hat.items():
        if not dominates(P, m.K[u]):
            raise HardError(f'blunted cone does not dominate K at {u}')
    strategy, witness = assemble_arbitrage(m, decomposition, K_hat)
    terminal = replay_kabanov(m, strategy, K_hat)
    if not any(terminal[witness]):
        raise HardError(f'terminal holding at witness {witness} is zero')
    logger.info('robust arbitrage: separator at %s, witness leaf %s', n, witness)
    return ArbitrageCertificate(strategy, witness, n, z, terminal=terminal,
                                decomposition=decomposition, dominating=K_hat,
                                strict_side=strict_side)


def kabanov_ftap(m: KabanovModel, nodes: Optional[Sequence[NodeId]] = None,
                 dominating: bool = False) -> FtapResult:
    check_assumptions(m, efficient=False)
    efficient = efficient_friction_holds(m)
    if not efficient:
        logger.warning('efficient friction fails; a no-arbitrage verdict is not robust-certified')
    inst = kabanov_to_msp(m, check_efficient=False)
    table = compute_W(inst)
    if is_solvable(inst, table):
        systems = _price_systems(inst, table, m.tree, nodes, priced=False)
        dom = construct_dominating_model(m) if dominating and efficient else None
        return FtapResult(NO_ARBITRAGE, systems, dominating=dom,
                          robust_certified=efficient, table=table)
    cert = kabanov_certificate(m, inst)
    return FtapResult(ARBITRAGE, certificate=cert, table=table)


def construct_dominating_model(m: KabanovModel) -> KabanovModel:
    '''
    Shrink V = ri K* at every node towards an interior point, as little as
    the backward index search allows while the problem stays solvable, and
    return the polar of the shrunk cones.
    '''
    check_assumptions(m, efficient=True)
    inst = kabanov_to_msp(m)
    if not is_solvable(inst):
        raise Unsolvable(*find_failure(inst))
    tree, d = m.tree, m.dim
    vertices, centers = {}, {}
    for u in tree.nodes():
        vertices[u] = polar_cone(m.K[u]).intersect(Polyhedron.box(d)).points
        centers[u] = sample_ri_point(inst.V[u])
    cache: Dict[Tuple[NodeId, int], SemiOpenPolyhedron] = {}

    def shrunk(u: NodeId, j: int) -> SemiOpenPolyhedron:
        if (u, j) not in cache:
            gens = [add(scale(Fraction(j, j + 1), p), scale(Fraction(1, j + 1), centers[u]))
                    for p in vertices[u]]
            cache[u, j] = relatively_open(Polyhedron.cone(d, rays=gens))
        return cache[u, j]

    index = {u: 1 for u in tree.nodes()}

    def nonempty(n: NodeId, j: int) -> bool:
        below = set(tree.subtree(n))
        V = {u: shrunk(u, index[u] + (j if u in below else 0)) for u in tree.nodes()}
        sub_inst = MspInstance(tree, V, dict(inst.C), d, conical=True)
        return not compute_W(sub_inst, root=n).W[n].is_empty

    for t in range(tree.horizon - 1, -1, -1):
        for n in tree.level(t):
            if nonempty(n, 0):
                continue
            lo, hi = 0, 1
            while not nonempty(n, hi):
                lo, hi = hi, hi * 2
                if hi > DOMINATION_MAX_INDEX:
                    raise HardError(f'index search at {n} exceeds {DOMINATION_MAX_INDEX}')
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if nonempty(n, mid):
                    hi = mid
                else:
                    lo = mid
            for u in tree.subtree(n):
                index[u] += hi
            logger.debug('index at %s raised by %d', n, hi)
    K_hat = {u: polar_cone(shrunk(u, index[u]).closure) for u in tree.nodes()}
    model = KabanovModel(tree, K_hat, dict(m.A))
    for u in tree.nodes():
        if not dominates(K_hat[u], m.K[u]):
            raise HardError(f'shrunk model does not dominate K at {u}')
    if not is_solvable(kabanov_to_msp(model, check_efficient=False)):
        raise HardError('dominating model is not solvable')
    logger.info('dominating model with indices %s',
                {str(u): j for u, j in sorted(index.items())})
    return model


# cost processes


def induced_kabanov(m: CostModel) -> KabanovModel:
    '''
    Solvency cones of the horizon costs on (riskless, risky) positions:
    K = {(delta, x) : delta >= S_inf(-x)}, the polar of cone{(1, slope)}.
    '''
    d1 = m.assets + 1
    K, A = {}, {}
    for n in m.tree.nodes():
        V = Polyhedron.cone(d1, rays=[(Fraction(1), ) + a for a in m.S[n].slopes])
        K[n] = polar_cone(V)
        A[n] = Polyhedron.whole(1).product(m.A[n])
    return KabanovModel(m.tree, K, A)


def cost_to_msp(m: CostModel) -> MspInstance:
    return kabanov_to_msp(induced_kabanov(m))


def replay_cost(m: CostModel, s: Strategy,
                costs: Optional[Dict[NodeId, CostFunction]] = None) -> Dict[NodeId, Fraction]:
    '''Terminal riskless position initial - sum S_t(h_t - h_{t-1}) per leaf'''
    tree = m.tree
    d = m.assets
    costs = m.S if costs is None else costs
    for n in tree.nodes():
        h = s.at(n, d)
        if not m.A[n].contains(h):
            raise Inadmissible(n, f'holding {fmt_vector(h)} outside A')
        if tree.is_leaf(n) and any(h):
            raise Inadmissible(n, 'terminal holding must vanish')
    out = {}
    for leaf in tree.leaves():
        value = Fraction(s.initial)
        before = zeros(d)
        for u in tree.path(leaf):
            h = s.at(u, d)
            value -= costs[u](sub(h, before))
            before = h
        out[leaf] = value
    return out


def dominating_costs(K_hat: Dict[NodeId, Polyhedron]) -> Dict[NodeId, CostFunction]:
    '''Homogeneous cost functions whose solvency cones are K_hat'''
    out = {}
    for n, P in K_hat.items():
        dual = polar_cone(P)
        if dual.lines:
            raise HardError(f'dominating cone at {n} is not full-dimensional')
        pieces = []
        for g in dual.rays:
            if g[0] <= 0:
                raise HardError(f'dominating cone at {n} admits free liquidation')
            pieces.append((scale(1 / g[0], g[1:]), Fraction(0)))
        out[n] = CostFunction(pieces)
    return out


def cost_certificate(m: CostModel, km: KabanovModel,
                     inst: MspInstance) -> ArbitrageCertificate:
    n, z, strict_side, decomposition = _separate_and_decompose(km, inst)
    K_hat = {u: blunt_cone(km.K[u]) for u in m.tree.nodes()}
    for u, P in K_hat.items():
        if not dominates(P, km.K[u]):
            raise HardError(f'blunted cone does not dominate K at {u}')
    S_hat = dominating_costs(K_hat)
    h = {u: v[1:] for u, v in decomposition.rest.items()}
    strategy = Strategy(h, Fraction(0), 'cost')
    slack = [u for u in sorted(decomposition.k) if K_hat[u].in_interior(decomposition.k[u])]
    if not slack:
        raise HardError('no increment of the decomposition is interior to the dominating cone')
    payoffs = replay_cost(m, strategy, S_hat)
    witness = _first_positive(payoffs, m.tree.subtree_leaves(slack[0]))
    if witness is None:
        raise HardError(f'no strictly positive payoff below {slack[0]}')
    for alpha in SCALING_CHECKS:
        scaled = strategy.scaled(alpha)
        strong = replay_cost(m, scaled, S_hat)
        weak = replay_cost(m, scaled)
        if any(v < 0 for v in strong.values()) or strong[witness] <= 0:
            raise HardError(f'scaled strategy {alpha}h is not an arbitrage under the dominating cost')
        if any(v < 0 for v in weak.values()):
            raise HardError(f'scaled strategy {alpha}h loses money under the original cost')
    logger.info('scalable arbitrage: separator at %s, witness leaf %s', n, witness)
    return ArbitrageCertificate(strategy, witness, n, z, payoffs=payoffs,
                                decomposition=decomposition, dominating=K_hat,
                                dominating_costs=S_hat, strict_side=strict_side,
                                weak_payoffs=replay_cost(m, strategy))


def cost_ftap(m: CostModel, nodes: Optional[Sequence[NodeId]] = None) -> FtapResult:
    km = induced_kabanov(m)
    check_assumptions(km, efficient=False)
    efficient = efficient_friction_holds(km)
    if not efficient:
        logger.warning('efficient friction fails; a no-arbitrage verdict is not robust-certified')
    inst = kabanov_to_msp(km, check_efficient=False)
    table = compute_W(inst)
    if is_solvable(inst, table):
        systems = _price_systems(inst, table, m.tree, nodes, priced=True)
        return FtapResult(NO_ARBITRAGE, systems, robust_certified=efficient, table=table)
    cert = cost_certificate(m, km, inst)
    return FtapResult(ARBITRAGE, certificate=cert, table=table)


# verification of serialized results


def check_price_system(m: Model, ps: PriceSystem) -> VerificationReport:
    if isinstance(m, FrictionlessModel):
        return check_frictionless_price_system(m, ps)
    km = induced_kabanov(m) if isinstance(m, CostModel) else m
    report = verify_solution(kabanov_to_msp(km, check_efficient=False), ps.solution)
    if isinstance(m, CostModel):
        if ps.P is not None and ps.P != _density_measure(m.tree, ps.solution):
            report.add(ps.anchor, 'pricing measure', 'does not match the density of xi')
    return report


def _check_path_sums(m: Model, d: Decomposition, report: VerificationReport):
    for leaf in m.tree.subtree_leaves(d.root):
        path = m.tree.path(leaf)[d.root.level + 1:]
        total = zeros(len(d.z))
        for u in path:
            total = add(total, d.k.get(u, zeros(len(d.z))))
        if total != d.z:
            report.add(leaf, 'decomposition sums to z', fmt_vector(total))


def _check_recorded(recorded, replayed, what: str, report: VerificationReport):
    for n, v in sorted(recorded.items()):
        if replayed.get(n) != v:
            report.add(n, f'recorded {what} match the replay')


def check_certificate(m: Model, cert: ArbitrageCertificate) -> VerificationReport:
    report = VerificationReport()
    tree = m.tree
    try:
        if isinstance(m, FrictionlessModel):
            payoffs = replay_frictionless(m, cert.strategy)
            _check_recorded(cert.payoffs, payoffs, 'payoffs', report)
            for leaf, v in payoffs.items():
                if v < 0:
                    report.add(leaf, 'payoff >= 0', str(v))
            if payoffs[cert.witness] <= 0:
                report.add(cert.witness, 'payoff > 0 at witness', str(payoffs[cert.witness]))
            return report
        km = induced_kabanov(m) if isinstance(m, CostModel) else m
        if cert.dominating is None:
            report.add(tree.root, 'dominating model', 'missing')
            return report
        K_hat = cert.dominating
        if isinstance(m, CostModel):
            if cert.dominating_costs is None:
                report.add(tree.root, 'dominating cost', 'missing')
                return report
            K_hat = induced_kabanov(CostModel(tree, cert.dominating_costs, m.A)).K
        for u in tree.nodes():
            if not dominates(K_hat[u], km.K[u]):
                report.add(u, 'domination', 'K minus its lineality is not in ri K_hat')
        if cert.decomposition is not None:
            _check_path_sums(m, cert.decomposition, report)
        if isinstance(m, KabanovModel):
            terminal = replay_kabanov(m, cert.strategy, K_hat)
            _check_recorded(cert.terminal, terminal, 'terminal holdings', report)
            if not any(terminal[cert.witness]):
                report.add(cert.witness, 'terminal holding nonzero at witness')
            return report
        for alpha in SCALING_CHECKS:
            scaled = cert.strategy.scaled(alpha)
            strong = replay_cost(m, scaled, cert.dominating_costs)
            weak = replay_cost(m, scaled)
            for leaf in tree.leaves():
                if strong[leaf] < 0:
                    report.add(leaf, f'payoff of {alpha}h >= 0 under the dominating cost')
                if weak[leaf] < 0:
                    report.add(leaf, f'payoff of {alpha}h >= 0 under the original cost')
            if strong[cert.witness] <= 0:
                report.add(cert.witness, f'payoff of {alpha}h > 0 at witness')
            if alpha == 1:
                _check_recorded(cert.payoffs, strong, 'payoffs', report)
                _check_recorded(cert.weak_payoffs, weak, 'weak payoffs', report)
    except (Inadmissible, NotMember, KeyError) as ex:
        report.add(getattr(ex, 'node', tree.root), 'replay', str(ex))
    return report


def model_to_msp(m: Model) -> MspInstance:
    if isinstance(m, FrictionlessModel):
        return frictionless_to_msp(m)
    if isinstance(m, CostModel):
        return kabanov_to_msp(induced_kabanov(m), check_efficient=False)
    return kabanov_to_msp(m, check_efficient=False)


def ftap(m: Model, nodes: Optional[Sequence[NodeId]] = None,
         dominating: bool = False) -> FtapResult:
    if isinstance(m, FrictionlessModel):
        return frictionless_ftap(m, nodes)
    if isinstance(m, CostModel):
        return cost_ftap(m, nodes)
    return kabanov_ftap(m, nodes, dominating=dominating)


def bid_ask_cone(bid, ask) -> Polyhedron:
    '''Solvency cone of one asset quoted at [bid, ask] against cash'''
    return polar_cone(Polyhedron.cone(2, rays=[vector([1, bid]), vector([1, ask])]))

