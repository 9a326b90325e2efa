'''
Martingale selection problems on finite scenario trees.

Distributed under the terms of the GNU General Public License v2 or later

An instance gives, per node, a semi-open convex set V (where the selection
takes values) and a closed convex set C (admissible conditional drift). The
backward recursion

    W = V                          on leaves
    W = V intersect (flat - C)     flat taken over the children's W

decides solvability, and the sets it leaves behind drive the construction
of explicit solutions: a selection xi and a finite-support measure Q with

    E_Q[xi(child) | n] - xi(n) in C(n)

at every node of positive mass.
'''

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import (
    Dict,
    List,
    Optional,
    Tuple,
)

from geometry import (
    ClosureViolation,
    HardError,
    SemiOpenPolyhedron,
    caratheodory_decompose,
    flat,
    intersect,
    minkowski_sum,
    relative_interior,
    sample_ri_point,
    sharp,
)
from polyhedron import NotACone, NotMember, Polyhedron, decompose_sum, strict_point
from rational import Vector, add, dot, fmt_vector, scale, sub, zeros
from scenario import (
    FiniteMeasure,
    NodeId,
    ScenarioTree,
    conditional_expectation,
    mix_measures,
    node_mass,
)

logger = logging.getLogger(__name__)

FLAT_MODES = ('flat', 'sharp')
RI_PLACEMENTS = ('difference', 'hull')


class Unsolvable(ValueError):

    def __init__(self, level: int, node: NodeId):
        super().__init__(f'problem is not solvable: W is empty at node {node} (level {level})')
        self.level = level
        self.node = node


class InvalidStart(ValueError):
    pass


class Mismatch(ValueError):
    pass


@dataclass
class MspInstance:
    tree: ScenarioTree
    V: Dict[NodeId, SemiOpenPolyhedron]
    C: Dict[NodeId, Polyhedron]
    dim: int
    conical: bool = False

    def __post_init__(self):
        for n in self.tree.nodes():
            if n not in self.V:
                raise ValueError(f'V undefined at node {n}')
            if n not in self.C:
                self.C[n] = Polyhedron.origin(self.dim)
            if self.V[n].dim != self.dim or self.C[n].dim != self.dim:
                raise ValueError(f'dimension mismatch at node {n}')
        if self.conical:
            for n in self.tree.nodes():
                if not self.V[n].is_cone:
                    raise NotACone(f'V at node {n} is not a cone')
                if not self.C[n].is_cone:
                    raise NotACone(f'C at node {n} is not a cone')


@dataclass
class WTable:
    '''
    W per node, with the intermediate sets of every interior node: sharp and
    flat of the children, and the target that V was intersected with.
    '''
    W: Dict[NodeId, SemiOpenPolyhedron]
    sharp: Dict[NodeId, SemiOpenPolyhedron] = field(default_factory=dict)
    flat: Dict[NodeId, SemiOpenPolyhedron] = field(default_factory=dict)
    target: Dict[NodeId, SemiOpenPolyhedron] = field(default_factory=dict)

    def __getitem__(self, n: NodeId) -> SemiOpenPolyhedron:
        return self.W[n]

    def empty_nodes(self) -> List[NodeId]:
        return sorted(n for n, S in self.W.items() if S.is_empty)


@dataclass
class Solution:
    xi: Dict[NodeId, Vector]
    Q: FiniteMeasure
    anchor: NodeId


@dataclass
class Violation:
    node: NodeId
    condition: str
    detail: str = ''

    def __str__(self):
        return f'{self.node}: {self.condition} {self.detail}'.rstrip()


@dataclass
class VerificationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def add(self, node: NodeId, condition: str, detail: str = ''):
        self.violations.append(Violation(node, condition, detail))


def _levels_backward(inst: MspInstance, root: Optional[NodeId]):
    tree = inst.tree
    nodes = tree.subtree(root) if root is not None else list(tree.nodes())
    for t in range(tree.horizon, -1, -1):
        yield t, [n for n in nodes if n.level == t]


def compute_W(inst: MspInstance, flat_mode: str = 'flat',
              root: Optional[NodeId] = None) -> WTable:
    '''
    Backward recursion over the whole tree, or over the subtree below root.
    flat_mode="sharp" replaces flat by sharp, which gives the same table
    when every V is open.
    '''
    if flat_mode not in FLAT_MODES:
        raise ValueError(f'flat_mode must be one of {FLAT_MODES}')
    tree = inst.tree
    table = WTable({})
    for t, nodes in _levels_backward(inst, root):
        for n in nodes:
            if tree.is_leaf(n):
                table.W[n] = inst.V[n]
                continue
            kids = [table.W[c] for c in tree.children(n)]
            try:
                sh = sharp(kids, inst.dim)
                if any(S.is_empty for S in kids):
                    fl = SemiOpenPolyhedron.empty(inst.dim)
                elif flat_mode == 'flat':
                    fl = flat(kids, sh)
                else:
                    fl = sh
                target = minkowski_sum(fl, inst.C[n].negate())
                table.W[n] = intersect(inst.V[n], target)
            except ClosureViolation as ex:
                raise ClosureViolation(f'at node {n} (level {t}): {ex}') from ex
            table.sharp[n], table.flat[n], table.target[n] = sh, fl, target
            logger.debug('W at %s: %r', n, table.W[n])
    return table


def is_solvable(inst: MspInstance, table: Optional[WTable] = None) -> bool:
    if table is None:
        table = compute_W(inst)
    return not table.empty_nodes()


def compute_w_ri(inst: MspInstance, ri_placement: str = 'difference') -> WTable:
    '''
    The relative-interior variant of the recursion:

        difference:  w = V intersect ri(sharp - C)
        hull:        w = V intersect (ri sharp - C)

    A node with an empty child gets an empty set, as in compute_W.
    '''
    if ri_placement not in RI_PLACEMENTS:
        raise ValueError(f'ri_placement must be one of {RI_PLACEMENTS}')
    tree = inst.tree
    table = WTable({})
    for t, nodes in _levels_backward(inst, None):
        for n in nodes:
            if tree.is_leaf(n):
                table.W[n] = inst.V[n]
                continue
            kids = [table.W[c] for c in tree.children(n)]
            sh = sharp(kids, inst.dim)
            try:
                if any(S.is_empty for S in kids):
                    target = SemiOpenPolyhedron.empty(inst.dim)
                elif ri_placement == 'difference':
                    target = relative_interior(minkowski_sum(sh, inst.C[n].negate()))
                else:
                    target = minkowski_sum(relative_interior(sh), inst.C[n].negate())
                table.W[n] = intersect(inst.V[n], target)
            except ClosureViolation as ex:
                raise ClosureViolation(f'at node {n} (level {t}): {ex}') from ex
            table.sharp[n], table.target[n] = sh, target
    return table


def find_failure(inst: MspInstance,
                 table: Optional[WTable] = None) -> Optional[Tuple[int, NodeId]]:
    '''Largest level with an empty W, and the lowest-index empty node there'''
    if table is None:
        table = compute_W(inst)
    empty = table.empty_nodes()
    if not empty:
        return None
    level = max(n.level for n in empty)
    node = min(n for n in empty if n.level == level)
    logger.info('W first fails at node %s', node)
    return level, node


# solutions


def _split_drift(inst: MspInstance, table: WTable, n: NodeId, xi: Vector) -> Vector:
    '''w in flat(n) with w - xi in C(n)'''
    fl = table.flat[n]
    C = inst.C[n]
    try:
        w, _ = decompose_sum(xi, fl.closure, C.negate())
        if fl.member(w):
            return w
    except NotMember:
        pass
    # search the included faces of flat for a point of xi + C
    P = fl.closure
    c_ineqs = [(c, e + dot(c, xi)) for c, e in C.inequalities]
    c_eqs = [(c, e + dot(c, xi)) for c, e in C.equalities]
    for G in fl.included_faces():
        strict = [con for i, con in enumerate(P.inequalities) if i not in G]
        eqs = list(P.equalities) + [P.inequalities[i] for i in sorted(G)]
        w = strict_point(inst.dim, strict, c_ineqs, eqs + c_eqs)
        if w is not None:
            return w
    raise HardError(f'{fmt_vector(xi)} in W at node {n} but not in flat - C')


def _merge(witness) -> Dict[int, Tuple[Fraction, Vector]]:
    merged: Dict[int, Tuple[Fraction, Vector]] = {}
    for lam, p, i in witness:
        if i in merged:
            mu, q = merged[i]
            total = mu + lam
            merged[i] = (total, add(scale(mu / total, q), scale(lam / total, p)))
        else:
            merged[i] = (lam, tuple(p))
    return merged


class _Builder:

    def __init__(self, inst: MspInstance, table: WTable, anchor: NodeId):
        self.inst = inst
        self.table = table
        self.anchor = anchor
        self.xi: Dict[NodeId, Vector] = {}

    def forced_child(self, n: NodeId) -> Optional[int]:
        tree = self.inst.tree
        if self.anchor.level <= n.level or not tree.is_ancestor(n, self.anchor):
            return None
        target = tree.ancestor(self.anchor, n.level + 1)
        return tree.children(n).index(target)

    def witness(self, n: NodeId, w: Vector) -> Dict[int, Tuple[Fraction, Vector]]:
        kids = [self.table.W[c] for c in self.inst.tree.children(n)]
        f = self.forced_child(n)
        if f is None:
            return _merge(caratheodory_decompose(w, kids))
        sh = self.table.sharp[n]
        hull = sh.closure
        F = hull.tight_set(w)
        forced = kids[f]
        x = None
        for G in forced.included_faces():
            p = forced.closure.face_point(G)
            if hull.tight_set(p) >= F:
                x = p
                break
        if x is None:
            raise HardError(f'child {f} of node {n} does not meet the face of {fmt_vector(w)}')
        if x == w:
            lam, z = Fraction(1, 2), w
        else:
            # largest step from w away from x that stays in ri F
            d = sub(w, x)
            s_max = None
            for i, (a, b) in enumerate(hull.inequalities):
                if i in F:
                    continue
                ad = dot(a, d)
                if ad < 0:
                    bound = (dot(a, w) - b) / -ad
                    s_max = bound if s_max is None else min(s_max, bound)
            s = Fraction(1) if s_max is None else min(s_max / 2, Fraction(1))
            z = add(w, scale(s, d))
            lam = s / (1 + s)
        rest = caratheodory_decompose(z, kids)
        witness = [(lam, x, f)] + [((1 - lam) * mu, p, i) for mu, p, i in rest]
        return _merge(witness)

    def extend(self, n: NodeId, xi: Vector) -> Dict[NodeId, Fraction]:
        '''Fill xi below n; returns the conditional leaf weights under n'''
        self.xi[n] = xi
        tree = self.inst.tree
        if tree.is_leaf(n):
            return {n: Fraction(1)}
        w = _split_drift(self.inst, self.table, n, xi)
        weights: Dict[NodeId, Fraction] = {}
        children = tree.children(n)
        for i, (q, point) in sorted(self.witness(n, w).items()):
            for leaf, ql in self.extend(children[i], point).items():
                weights[leaf] = q * ql
        return weights


def build_local_solution(inst: MspInstance, anchor: NodeId, start: Optional[Vector] = None,
                         table: Optional[WTable] = None) -> Solution:
    '''
    A solution whose measure charges the anchor node, pasted together from
    one-step representations of the W sets.
    '''
    tree = inst.tree
    if anchor not in tree:
        raise ValueError(f'no node {anchor} in this tree')
    if table is None:
        table = compute_W(inst)
    failure = find_failure(inst, table)
    if failure is not None:
        raise Unsolvable(*failure)
    W0 = table.W[tree.root]
    if start is None:
        start = sample_ri_point(W0)
    elif not W0.member(start):
        raise InvalidStart(f'start {fmt_vector(start)} is not in W at the root')
    builder = _Builder(inst, table, NodeId(*anchor))
    weights = builder.extend(tree.root, tuple(start))
    Q = FiniteMeasure(tree, weights)
    xi = {n: v for n, v in builder.xi.items() if node_mass(Q, n) > 0}
    logger.info('built solution anchored at %s with %d leaves in the support',
                anchor, len(Q.weights))
    return Solution(xi, Q, NodeId(*anchor))


def mix_solutions(s1: Solution, s2: Solution, mu: Fraction) -> Solution:
    '''mu * s1 + (1 - mu) * s2, the selection averaged with the node masses'''
    mu = Fraction(mu)
    if not (0 < mu < 1):
        raise ValueError(f'mixing weight {mu} outside (0, 1)')
    if s1.Q.tree is not s2.Q.tree:
        raise Mismatch('solutions live on different trees')
    d1 = len(next(iter(s1.xi.values())))
    d2 = len(next(iter(s2.xi.values())))
    if d1 != d2:
        raise Mismatch(f'solutions of dimension {d1} and {d2}')
    Q = mix_measures([(mu, s1.Q), (1 - mu, s2.Q)])
    xi: Dict[NodeId, Vector] = {}
    for n in Q.tree.nodes():
        m = node_mass(Q, n)
        if m == 0:
            continue
        acc = zeros(d1)
        for lam, s in ((mu, s1), (1 - mu, s2)):
            mk = node_mass(s.Q, n)
            if mk:
                acc = add(acc, scale(lam * mk / m, s.xi[n]))
        xi[n] = acc
    return Solution(xi, Q, s1.anchor)


def verify_solution(inst: MspInstance, s: Solution) -> VerificationReport:
    '''Exact check of values in V and drift in C at every node of positive mass'''
    report = VerificationReport()
    tree = inst.tree
    if s.Q.tree is not tree:
        report.add(tree.root, 'tree', 'solution lives on a different tree')
        return report
    if node_mass(s.Q, s.anchor) <= 0:
        report.add(s.anchor, 'anchor', 'has zero mass')
    for n in tree.nodes():
        if node_mass(s.Q, n) == 0:
            continue
        if n not in s.xi:
            report.add(n, 'defined', 'xi missing at a node of positive mass')
            continue
        if len(s.xi[n]) != inst.dim or not inst.V[n].member(s.xi[n]):
            report.add(n, 'xi in V', fmt_vector(s.xi[n]))
        if tree.is_leaf(n):
            continue
        try:
            drift = sub(conditional_expectation(s.xi, s.Q, n), s.xi[n])
        except ValueError as ex:
            report.add(n, 'drift', str(ex))
            continue
        if not inst.C[n].contains(drift):
            report.add(n, 'drift in C', fmt_vector(drift))
    for v in report.violations:
        logger.debug('violation %s', v)
    return report


def solution_in_W(table: WTable, s: Solution) -> bool:
    return all(table.W[n].member(x) for n, x in s.xi.items())
