'''
Brute-force verifiers for small conical instances and tiny market models.

Distributed under the terms of the GNU General Public License v2 or later

The solvability oracle works on node masses q and moment vectors m = q*xi,
which turns the bilinear martingale condition into linear constraints when
V and C are cones. Strict membership (positive anchor mass, excluded faces
of V) is settled on a maximal-support point of the moment polyhedron, with
lazy branching over the faces that point lands on.

The arbitrage searches are single exact LPs over bounded strategies.
'''

import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import (
    Dict,
    FrozenSet,
    Hashable,
    List,
    Optional,
    Sequence,
    Tuple,
)

from markets import FrictionlessModel, KabanovModel, Strategy
from msp_core import MspInstance, is_solvable
from polyhedron import Constraint, lp_maximize
from rational import Vector, add, fmt_vector, scale, zeros
from scenario import NodeId, ScenarioTree

logger = logging.getLogger(__name__)

MAX_LEVELS = 3
MAX_BRANCHING = 3
MAX_DIMENSION = 4

CAP_ENV = 'MARTSEL_ORACLE_CAP'


class Unsupported(ValueError):
    pass


def caps() -> Tuple[int, int, int]:
    '''(levels, branching, dimension), overridable from the environment'''
    text = os.environ.get(CAP_ENV)
    if not text:
        return MAX_LEVELS, MAX_BRANCHING, MAX_DIMENSION
    try:
        levels, branching, dimension = (int(v) for v in text.split(','))
    except ValueError:
        raise Unsupported(f'{CAP_ENV} must be "levels,branching,dimension", got {text!r}') from None
    logger.warning('oracle caps overridden: levels=%d branching=%d dimension=%d',
                   levels, branching, dimension)
    return levels, branching, dimension


def _check_size(tree: ScenarioTree, dim: int):
    levels, branching, dimension = caps()
    if tree.horizon > levels:
        raise Unsupported(f'{tree.horizon} levels above the oracle cap {levels}')
    if tree.branching() > branching:
        raise Unsupported(f'branching {tree.branching()} above the oracle cap {branching}')
    if dim > dimension:
        raise Unsupported(f'dimension {dim} above the oracle cap {dimension}')


Label = Tuple[Hashable, ...]


@dataclass
class MomentProgram:
    '''
    Variables per node n: mass q(n) followed by the moment vector m(n).

        q(root) = 1, q(n) = sum of q over the children, q >= 0
        -q(n) <= m(n)_j <= q(n)
        m(n) in cl V(n)
        sum over children of m(c) - m(n) in C(n)
    '''
    inst: MspInstance
    nodes: List[NodeId] = field(init=False)
    inequalities: List[Constraint] = field(init=False)
    labels: List[Label] = field(init=False)
    equalities: List[Constraint] = field(init=False)

    def __post_init__(self):
        inst = self.inst
        tree = inst.tree
        self.nodes = list(tree.nodes())
        self._pos = {n: i for i, n in enumerate(self.nodes)}
        self.inequalities, self.labels, self.equalities = [], [], []
        d = inst.dim
        self.add_eq({self.q(tree.root): 1}, 1)
        for n in self.nodes:
            self.add_ineq(('q', n), {self.q(n): 1})
            for j in range(d):
                self.add_ineq(('box+', n, j), {self.q(n): 1, self.m(n, j): -1})
                self.add_ineq(('box-', n, j), {self.q(n): 1, self.m(n, j): 1})
            V = inst.V[n].closure
            for k, (a, b) in enumerate(V.inequalities):
                self.add_ineq(('V', n, k), self._moment(n, a), b)
            for a, b in V.equalities:
                self.add_eq(self._moment(n, a), b)
            if tree.is_leaf(n):
                continue
            kids = tree.children(n)
            flow = {self.q(n): Fraction(1)}
            for c in kids:
                flow[self.q(c)] = Fraction(-1)
            self.add_eq(flow, 0)
            C = inst.C[n]
            for k, (a, b) in enumerate(C.inequalities):
                self.add_ineq(('C', n, k), self._drift(n, kids, a), b)
            for a, b in C.equalities:
                self.add_eq(self._drift(n, kids, a), b)

    @property
    def nvars(self) -> int:
        return len(self.nodes) * (self.inst.dim + 1)

    def q(self, n: NodeId) -> int:
        return self._pos[n] * (self.inst.dim + 1)

    def m(self, n: NodeId, j: int) -> int:
        return self.q(n) + 1 + j

    def _moment(self, n: NodeId, a: Sequence[Fraction]) -> Dict[int, Fraction]:
        return {self.m(n, j): c for j, c in enumerate(a) if c}

    def _drift(self, n: NodeId, kids: List[NodeId], a: Sequence[Fraction]) -> Dict[int, Fraction]:
        row: Dict[int, Fraction] = {}
        for j, c in enumerate(a):
            if not c:
                continue
            row[self.m(n, j)] = -c
            for k in kids:
                row[self.m(k, j)] = c
        return row

    def _row(self, entries: Dict[int, Fraction]) -> Vector:
        out = [Fraction(0)] * self.nvars
        for i, c in entries.items():
            out[i] = Fraction(c)
        return tuple(out)

    def add_ineq(self, label: Label, entries: Dict[int, Fraction], b=0):
        self.inequalities.append((self._row(entries), Fraction(b)))
        self.labels.append(label)

    def add_eq(self, entries: Dict[int, Fraction], b=0):
        self.equalities.append((self._row(entries), Fraction(b)))

    def fix(self, extra: FrozenSet[Label]) -> List[Constraint]:
        '''Inequality rows with the given labels, as equalities'''
        return [row for row, label in zip(self.inequalities, self.labels) if label in extra]

    def maximal_support_point(self, extra: FrozenSet[Label]) -> Optional[Vector]:
        '''
        A point of the moment polyhedron (with the extra rows made tight)
        where every inequality that can be strict is strict, or None.
        '''
        eqs = self.equalities + self.fix(extra)
        rows = self.inequalities
        remaining = set(range(len(rows)))
        points = []
        while True:
            objective = [Fraction(0)] * self.nvars
            for r in remaining:
                objective = add(objective, rows[r][0])
            res = lp_maximize(self.nvars, objective, rows, eqs)
            if not res.optimal:
                if res.status == 'unbounded':
                    raise ValueError('moment polyhedron is unbounded')
                return None
            points.append(res.solution)
            strict = {r for r in remaining
                      if sum(a * x for a, x in zip(rows[r][0], res.solution)) > rows[r][1]}
            if not strict:
                break
            remaining -= strict
        return scale(Fraction(1, len(points)), _sum(points))

    def xi(self, x: Vector, n: NodeId) -> Optional[Vector]:
        mass = x[self.q(n)]
        if mass == 0:
            return None
        return tuple(x[self.m(n, j)] / mass for j in range(self.inst.dim))


def _sum(points: List[Vector]) -> Vector:
    out = zeros(len(points[0]))
    for p in points:
        out = add(out, p)
    return out


def oracle_solvable(inst: MspInstance, anchor: NodeId, program: Optional[MomentProgram] = None) -> bool:
    '''Exhaustive decision whether a local solution charging anchor exists'''
    if not inst.conical:
        raise Unsupported('the oracle covers conical instances only')
    _check_size(inst.tree, inst.dim)
    anchor = NodeId(*anchor)
    if anchor not in inst.tree:
        raise ValueError(f'no node {anchor} in this tree')
    program = program or MomentProgram(inst)
    seen = set()
    stack: List[FrozenSet[Label]] = [frozenset()]
    while stack:
        extra = stack.pop()
        if extra in seen:
            continue
        seen.add(extra)
        x = program.maximal_support_point(extra)
        if x is None or x[program.q(anchor)] == 0:
            continue
        bad = None
        for n in program.nodes:
            xi = program.xi(x, n)
            if xi is not None and not inst.V[n].member(xi):
                bad = n, xi
                break
        if bad is None:
            logger.debug('anchor %s: moment point found after %d patterns', anchor, len(seen))
            return True
        n, xi = bad
        V = inst.V[n]
        tight = V.closure.tight_set(xi)
        logger.debug('anchor %s: xi at %s = %s on an excluded face', anchor, n, fmt_vector(xi))
        stack.append(extra | {('q', n)})
        for face in V.included_faces():
            if face > tight:
                stack.append(extra | {('V', n, k) for k in face})
    return False


def oracle_verdicts(inst: MspInstance) -> Dict[NodeId, bool]:
    program = MomentProgram(inst)
    return {n: oracle_solvable(inst, n, program) for n in inst.tree.nodes()}


@dataclass
class OracleDiff:
    solver: bool
    oracle: Dict[NodeId, bool]

    @property
    def agree(self) -> bool:
        return self.solver == all(self.oracle.values())

    def disagreements(self) -> List[NodeId]:
        if self.agree:
            return []
        return [n for n, ok in self.oracle.items() if ok != self.solver]


def compare_with_solver(inst: MspInstance) -> OracleDiff:
    diff = OracleDiff(is_solvable(inst), oracle_verdicts(inst))
    if not diff.agree:
        logger.warning('solver and oracle disagree at %s', [str(n) for n in diff.disagreements()])
    return diff


def oracle_frictionless_arbitrage(m: FrictionlessModel) -> bool:
    '''
    Maximize the summed terminal value over strategies with |h|_1 <= 1,
    h(n) in A(n) and every terminal value nonnegative.
    '''
    tree = m.tree
    _check_size(tree, m.assets + 1)
    d = m.assets
    inner = [n for n in tree.nodes() if not tree.is_leaf(n)]
    pos = {n: i for i, n in enumerate(inner)}
    # variables: h(n) then u(n) with -u <= h <= u
    nv = 2 * d * len(inner)
    h = lambda n, j: pos[n] * d + j
    u = lambda n, j: d * len(inner) + pos[n] * d + j

    def row(entries: Dict[int, Fraction]) -> Vector:
        out = [Fraction(0)] * nv
        for i, c in entries.items():
            out[i] += c
        return tuple(out)

    ineqs: List[Constraint] = []
    eqs: List[Constraint] = []
    total: Dict[int, Fraction] = {}
    for n in inner:
        for a, b in m.A[n].inequalities:
            ineqs.append((row({h(n, j): c for j, c in enumerate(a)}), b))
        for a, b in m.A[n].equalities:
            eqs.append((row({h(n, j): c for j, c in enumerate(a)}), b))
        for j in range(d):
            ineqs.append((row({u(n, j): 1, h(n, j): -1}), Fraction(0)))
            ineqs.append((row({u(n, j): 1, h(n, j): 1}), Fraction(0)))
            total[u(n, j)] = Fraction(-1)
    ineqs.append((row(total), Fraction(-1)))
    objective = [Fraction(0)] * nv
    for leaf in tree.leaves():
        path = tree.path(leaf)
        value: Dict[int, Fraction] = {}
        for a, b in zip(path, path[1:]):
            for j in range(d):
                value[h(a, j)] = value.get(h(a, j), Fraction(0)) + m.prices[b][j] - m.prices[a][j]
        vrow = row(value)
        ineqs.append((vrow, Fraction(0)))
        objective = add(objective, vrow)
    res = lp_maximize(nv, objective, ineqs, eqs)
    found = res.optimal and res.value > 0
    logger.info('frictionless arbitrage search: optimum %s', res.value)
    return found


def oracle_kabanov_arbitrage(m: KabanovModel, return_strategy: bool = False):
    '''
    Maximize the summed terminal holdings over box-bounded strategies with
    h in A, increments in -K and nonnegative terminal holdings. With
    return_strategy the maximizer is returned as well (None without one).
    '''
    tree = m.tree
    _check_size(tree, m.dim)
    d = m.dim
    nodes = list(tree.nodes())
    pos = {n: i for i, n in enumerate(nodes)}
    nv = d * len(nodes)
    h = lambda n, j: pos[n] * d + j

    def row(entries: Dict[int, Fraction]) -> Vector:
        out = [Fraction(0)] * nv
        for i, c in entries.items():
            out[i] += c
        return tuple(out)

    ineqs: List[Constraint] = []
    eqs: List[Constraint] = []
    objective = [Fraction(0)] * nv
    for n in nodes:
        for a, b in m.A[n].inequalities:
            ineqs.append((row({h(n, j): c for j, c in enumerate(a)}), b))
        for a, b in m.A[n].equalities:
            eqs.append((row({h(n, j): c for j, c in enumerate(a)}), b))
        parent = tree.parent(n)
        # h(parent) - h(n) in K(n)
        for target, rows in ((ineqs, m.K[n].inequalities), (eqs, m.K[n].equalities)):
            for a, b in rows:
                entries = {h(n, j): -c for j, c in enumerate(a)}
                if parent is not None:
                    for j, c in enumerate(a):
                        entries[h(parent, j)] = entries.get(h(parent, j), Fraction(0)) + c
                target.append((row(entries), b))
        for j in range(d):
            ineqs.append((row({h(n, j): -1}), Fraction(-1)))
            ineqs.append((row({h(n, j): 1}), Fraction(-1 if not tree.is_leaf(n) else 0)))
            if tree.is_leaf(n):
                objective[h(n, j)] = Fraction(1)
    res = lp_maximize(nv, objective, ineqs, eqs)
    found = res.optimal and res.value > 0
    logger.info('kabanov arbitrage search: optimum %s', res.value)
    if not return_strategy:
        return found
    if not found:
        return False, None
    x = res.solution
    strategy = Strategy({n: tuple(x[h(n, j)] for j in range(d)) for n in nodes},
                        Fraction(0), 'kabanov')
    return True, strategy
