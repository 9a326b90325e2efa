'''
Finite scenario trees, finite-support measures on their leaves and
conditional expectations along the tree.

Distributed under the terms of the GNU General Public License v2 or later

    >>> tree = ScenarioTree.from_branching([2])
    >>> [str(n) for n in tree.leaves()]
    ['1:0', '1:1']
    >>> Q = FiniteMeasure.uniform(tree)
    >>> node_mass(Q, tree.root)
    Fraction(1, 1)
'''

import logging
from fractions import Fraction
from typing import (
    Dict,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

from rational import Vector, add, scale, zeros

logger = logging.getLogger(__name__)


class TreeError(ValueError):
    pass


class ZeroMass(ValueError):
    pass


class NodeId(NamedTuple):
    level: int
    index: int

    def __str__(self):
        return f'{self.level}:{self.index}'

    @classmethod
    def parse(cls, text: str) -> 'NodeId':
        try:
            level, index = text.split(':')
            return cls(int(level), int(index))
        except ValueError:
            raise ValueError(f'node must be written LEVEL:INDEX, got {text!r}') from None


class ScenarioTree:
    '''
    Levels 0..T of nodes. parents[t][i] is the index (at level t-1) of the
    parent of node (t, i); the single level-0 node has parent None.
    '''

    def __init__(self, parents: Sequence[Sequence[Optional[int]]],
                 labels: Optional[Sequence[Sequence[Optional[str]]]] = None):
        if not parents or len(parents[0]) != 1:
            raise TreeError('level 0 must contain exactly one node')
        if parents[0][0] is not None:
            raise TreeError('node 0:0 must not have a parent')
        self._parents: List[List[Optional[int]]] = [list(level) for level in parents]
        self._children: List[List[List[int]]] = []
        for t, level in enumerate(self._parents):
            self._children.append([[] for _ in level])
            if t == 0:
                continue
            if not level:
                raise TreeError(f'level {t} is empty')
            for i, p in enumerate(level):
                if p is None or not (0 <= p < len(self._parents[t - 1])):
                    raise TreeError(f'node {t}:{i} has invalid parent {p!r}')
                self._children[t - 1][p].append(i)
        for t in range(self.horizon):
            for i, kids in enumerate(self._children[t]):
                if not kids:
                    raise TreeError(f'node {t}:{i} at level {t} < {self.horizon} has no children')
        if labels is None:
            labels = [[None] * len(level) for level in parents]
        if [len(level) for level in labels] != [len(level) for level in parents]:
            raise TreeError('labels do not match the tree shape')
        self._labels = [list(level) for level in labels]

    @classmethod
    def from_branching(cls, branching: Sequence[int]) -> 'ScenarioTree':
        '''Uniform tree: every level-t node has branching[t] children'''
        parents: List[List[Optional[int]]] = [[None]]
        for b in branching:
            if b < 1:
                raise TreeError(f'branching must be positive, got {b}')
            parents.append([p for p in range(len(parents[-1])) for _ in range(b)])
        return cls(parents)

    @property
    def horizon(self) -> int:
        return len(self._parents) - 1

    @property
    def root(self) -> NodeId:
        return NodeId(0, 0)

    def __len__(self):
        return sum(len(level) for level in self._parents)

    def __contains__(self, n) -> bool:
        return (isinstance(n, tuple) and len(n) == 2 and 0 <= n[0] <= self.horizon
                and 0 <= n[1] < len(self._parents[n[0]]))

    def _check(self, n: NodeId):
        if n not in self:
            raise TreeError(f'no node {n[0]}:{n[1]} in this tree')

    def level(self, t: int) -> List[NodeId]:
        return [NodeId(t, i) for i in range(len(self._parents[t]))]

    def nodes(self) -> Iterator[NodeId]:
        '''All nodes, level by level'''
        for t in range(self.horizon + 1):
            yield from self.level(t)

    def parent(self, n: NodeId) -> Optional[NodeId]:
        self._check(n)
        p = self._parents[n.level][n.index]
        return None if p is None else NodeId(n.level - 1, p)

    def children(self, n: NodeId) -> List[NodeId]:
        self._check(n)
        return [NodeId(n.level + 1, i) for i in self._children[n.level][n.index]]

    def is_leaf(self, n: NodeId) -> bool:
        return n.level == self.horizon

    def leaves(self) -> List[NodeId]:
        return self.level(self.horizon)

    def label(self, n: NodeId) -> str:
        self._check(n)
        return self._labels[n.level][n.index] or str(n)

    def path(self, n: NodeId) -> List[NodeId]:
        '''Nodes from the root down to n, inclusive'''
        self._check(n)
        out = [n]
        while out[-1].level > 0:
            out.append(self.parent(out[-1]))
        return out[::-1]

    def ancestor(self, n: NodeId, level: int) -> NodeId:
        return self.path(n)[level]

    def is_ancestor(self, a: NodeId, n: NodeId) -> bool:
        '''a lies on the path from the root to n (a == n counts)'''
        return a.level <= n.level and self.ancestor(n, a.level) == a

    def subtree(self, n: NodeId) -> List[NodeId]:
        '''n and all its descendants, level by level'''
        out = [n]
        for node in out:
            out.extend(self.children(node))
        return sorted(out)

    def subtree_leaves(self, n: NodeId) -> List[NodeId]:
        return [u for u in self.subtree(n) if self.is_leaf(u)]

    def branching(self) -> int:
        return max((len(kids) for level in self._children for kids in level), default=0)

    def parent_lists(self) -> List[List[Optional[int]]]:
        return [list(level) for level in self._parents]

    def labels(self) -> List[List[Optional[str]]]:
        return [list(level) for level in self._labels]


class FiniteMeasure:
    '''Probability weights on leaves; zero weights are not stored'''

    __slots__ = ('tree', 'weights')

    def __init__(self, tree: ScenarioTree, weights: Mapping[NodeId, Fraction]):
        self.tree = tree
        clean: Dict[NodeId, Fraction] = {}
        for n, w in weights.items():
            n = NodeId(*n)
            w = Fraction(w)
            if n not in tree or not tree.is_leaf(n):
                raise TreeError(f'measure weight on non-leaf {n}')
            if w < 0:
                raise ValueError(f'negative weight {w} at {n}')
            if w:
                clean[n] = w
        if sum(clean.values()) != 1:
            raise ValueError(f'weights sum to {sum(clean.values())}, not 1')
        self.weights = dict(sorted(clean.items()))

    @classmethod
    def dirac(cls, tree: ScenarioTree, leaf: NodeId) -> 'FiniteMeasure':
        return cls(tree, {leaf: Fraction(1)})

    @classmethod
    def uniform(cls, tree: ScenarioTree,
                leaves: Optional[Sequence[NodeId]] = None) -> 'FiniteMeasure':
        leaves = tree.leaves() if leaves is None else list(leaves)
        return cls(tree, {n: Fraction(1, len(leaves)) for n in leaves})

    @property
    def support(self) -> List[NodeId]:
        return list(self.weights)

    def mass(self, n: NodeId) -> Fraction:
        return node_mass(self, n)

    def __eq__(self, other):
        if not isinstance(other, FiniteMeasure):
            return NotImplemented
        return self.tree is other.tree and self.weights == other.weights

    def __repr__(self):
        inner = ', '.join(f'{n}: {w}' for n, w in self.weights.items())
        return f'FiniteMeasure({{{inner}}})'


def node_mass(Q: FiniteMeasure, n: NodeId) -> Fraction:
    if n not in Q.tree:
        raise TreeError(f'no node {n} in this tree')
    return sum((w for leaf, w in Q.weights.items() if Q.tree.ancestor(leaf, n.level) == n),
               Fraction(0))


def conditional_expectation(X: Mapping[NodeId, Sequence[Fraction]], Q: FiniteMeasure,
                            n: NodeId) -> Vector:
    '''E_Q[X | node n] for X given on the children of n'''
    m = node_mass(Q, n)
    if m == 0:
        raise ZeroMass(f'node {n} has zero mass')
    out: Optional[Vector] = None
    for c in Q.tree.children(n):
        mc = node_mass(Q, c)
        if mc == 0:
            continue
        if c not in X:
            raise ValueError(f'process undefined at node {c} of positive mass')
        term = scale(mc / m, X[c])
        out = term if out is None else add(out, term)
    assert out is not None
    return out


def mix_measures(parts: Sequence[Tuple[Fraction, FiniteMeasure]]) -> FiniteMeasure:
    '''Leafwise convex combination'''
    if not parts:
        raise ValueError('nothing to mix')
    tree = parts[0][1].tree
    weights: Dict[NodeId, Fraction] = {}
    total = Fraction(0)
    for lam, Q in parts:
        lam = Fraction(lam)
        if not (0 < lam <= 1):
            raise ValueError(f'mixing weight {lam} outside (0, 1]')
        if Q.tree is not tree:
            raise ValueError('measures live on different trees')
        total += lam
        for leaf, w in Q.weights.items():
            weights[leaf] = weights.get(leaf, Fraction(0)) + lam * w
    if total != 1:
        raise ValueError(f'mixing weights sum to {total}, not 1')
    return FiniteMeasure(tree, weights)


def constant_process(tree: ScenarioTree, value: Sequence[Fraction]) -> Dict[NodeId, Vector]:
    return {n: tuple(Fraction(c) for c in value) for n in tree.nodes()}


def expectation(X: Mapping[NodeId, Sequence[Fraction]], Q: FiniteMeasure) -> Vector:
    '''Unconditional expectation of a terminal process'''
    d = len(next(iter(X.values())))
    out = zeros(d)
    for leaf, w in Q.weights.items():
        out = add(out, scale(w, X[leaf]))
    return out
