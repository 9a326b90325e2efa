'''
Semi-open convex polyhedra: a closed rational polyhedron together with one
inclusion flag per face of its face lattice. The set is the union of the
relative interiors of the included faces.

Distributed under the terms of the GNU General Public License v2 or later

    >>> from polyhedron import Polyhedron
    >>> segment = Polyhedron.from_v(1, points=[[0], [1]])
    >>> S = relatively_open(segment)
    >>> S.member(vector([0])), S.member(vector(["1/2"]))
    (False, True)
    >>> T = conv_union([closed(Polyhedron.point([0])), S])
    >>> T.member(vector([0])), T.member(vector([1]))
    (True, False)

Every operation builds its result by flagging each face of a candidate
closure with a membership test at one relative-interior point of that face.
'''

import logging
import random
from fractions import Fraction
from typing import (
    Callable,
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from polyhedron import (
    Constraint,
    FaceId,
    NotMember,
    Polyhedron,
    decompose_sum,
    lp_maximize,
    minimal_face,
    polar_cone,
    strict_point,
)
from rational import (
    Vector,
    add,
    combination,
    dot,
    fmt_vector,
    kernel_vector,
    neg,
    scale,
    sub,
    vector,
    zeros,
)

logger = logging.getLogger(__name__)

# test a second interior point of every face while flagging
CHECK_FACE_CONSTANCY = True


class EmptySet(ValueError):
    pass


class NoSeparator(ValueError):
    pass


class HardError(ValueError):
    '''A guaranteed property of a construction failed to hold'''


class ClosureViolation(HardError):
    pass


class SemiOpenPolyhedron:
    '''
    Convex union of relatively open faces of a closed polyhedron. The
    closure is the true closure of the set: the top face is always included
    when the set is nonempty.
    '''

    __slots__ = ('closure', 'included')

    def __init__(self, closure: Polyhedron, included: Mapping[FaceId, bool]):
        self.closure = closure
        self.included: Dict[FaceId, bool] = dict(included)
        if not closure.is_empty and not self.included.get(closure.top_face):
            raise ClosureViolation('top face of a nonempty semi-open set is excluded')

    @classmethod
    def closed(cls, P: Polyhedron) -> 'SemiOpenPolyhedron':
        return cls(P, {F: True for F in P.faces()})

    @classmethod
    def relatively_open(cls, P: Polyhedron) -> 'SemiOpenPolyhedron':
        top = P.top_face
        return cls(P, {F: F == top for F in P.faces()})

    @classmethod
    def empty(cls, dim: int) -> 'SemiOpenPolyhedron':
        return cls(Polyhedron.empty(dim), {})

    @classmethod
    def from_flags(cls, P: Polyhedron, included: Mapping[FaceId, bool]) -> 'SemiOpenPolyhedron':
        '''
        Build from a (possibly partial) flag table; missing faces count as
        excluded. The smallest face containing two included faces must be
        included too, otherwise the union is not convex.
        '''
        faces = [F for F in P.faces() if included.get(F)]
        points = {F: P.face_point(F) for F in faces}
        for i, F in enumerate(faces):
            for G in faces[i + 1:]:
                join = P.tight_set(scale(Fraction(1, 2), add(points[F], points[G])))
                if not included.get(join):
                    raise ClosureViolation(
                        f'faces {sorted(F)} and {sorted(G)} are included but '
                        f'their join {sorted(join)} is not')
        return _realize(P, lambda x: bool(included.get(P.tight_set(x), False)))

    @property
    def dim(self) -> int:
        return self.closure.dim

    @property
    def is_empty(self) -> bool:
        return self.closure.is_empty

    def member(self, x: Sequence[Fraction]) -> bool:
        if len(x) != self.dim:
            raise ValueError(f'point of length {len(x)} in dimension {self.dim}')
        if not self.closure.contains(x):
            return False
        return self.included.get(self.closure.tight_set(x), False)

    __contains__ = member

    def included_faces(self) -> List[FaceId]:
        return [F for F in self.closure.faces() if self.included[F]]

    def excluded_faces(self) -> List[FaceId]:
        return [F for F in self.closure.faces() if not self.included[F]]

    @property
    def is_closed(self) -> bool:
        return all(self.included.values())

    @property
    def is_relatively_open(self) -> bool:
        return self.included_faces() == [self.closure.top_face] or self.is_empty

    @property
    def is_open(self) -> bool:
        '''Open in the ambient space'''
        return self.is_empty or (self.is_relatively_open
                                 and self.closure.affine_dimension == self.dim)

    @property
    def is_cone(self) -> bool:
        return self.is_empty or self.closure.is_cone

    def negate(self) -> 'SemiOpenPolyhedron':
        if self.is_empty:
            return self
        neg_closure = self.closure.negate()
        return _realize(neg_closure, lambda x: self.member(neg(x)))

    def subset_of(self, other: 'SemiOpenPolyhedron') -> bool:
        '''
        Exact inclusion test: a relatively open convex piece of cl(other)
        lies inside the relative interior of a single face of cl(other).
        '''
        if self.is_empty:
            return True
        if not other.closure.contains_polyhedron(self.closure):
            return False
        return all(other.member(self.closure.face_point(F)) for F in self.included_faces())

    def same_set(self, other: 'SemiOpenPolyhedron') -> bool:
        return self.subset_of(other) and other.subset_of(self)

    def describe(self) -> Dict[str, object]:
        out = self.closure.describe()
        out['faces'] = [{'tight': sorted(F), 'included': self.included[F]}
                        for F in self.closure.faces()]
        return out

    def __repr__(self):
        if self.is_empty:
            return f'<SemiOpenPolyhedron dim={self.dim} empty>'
        return (f'<SemiOpenPolyhedron dim={self.dim} '
                f'{len(self.included_faces())}/{len(self.included)} faces>')


closed = SemiOpenPolyhedron.closed
relatively_open = SemiOpenPolyhedron.relatively_open


def _as_semi_open(S) -> SemiOpenPolyhedron:
    return S if isinstance(S, SemiOpenPolyhedron) else closed(S)


def _realize(H: Polyhedron, member: Callable[[Vector], bool]) -> SemiOpenPolyhedron:
    '''
    Flag every face of H by one membership test, then cut H down to the
    closure of the flagged union.
    '''
    if H.is_empty:
        return SemiOpenPolyhedron.empty(H.dim)
    flags: Dict[FaceId, bool] = {}
    for F in H.faces():
        flags[F] = member(H.face_point(F))
        if CHECK_FACE_CONSTANCY and H.face_dimension(F) > 0:
            if member(H.face_point(F, alternate=True)) != flags[F]:
                raise ClosureViolation(
                    f'membership not constant on face {sorted(F)} of {H!r}')
    included = [F for F in H.faces() if flags[F]]
    if not included:
        return SemiOpenPolyhedron.empty(H.dim)
    G = included[0]
    for F in included:
        if not F >= G:
            raise ClosureViolation(
                f'included faces {sorted(G)} and {sorted(F)} are not nested')
    if G == H.top_face:
        return SemiOpenPolyhedron(H, flags)
    P = H.face(G)
    return SemiOpenPolyhedron(P, {F: flags[H.tight_set(P.face_point(F))] for F in P.faces()})


# standard operations


def member(S: SemiOpenPolyhedron, x: Sequence[Fraction]) -> bool:
    return S.member(x)


def relative_interior(S: SemiOpenPolyhedron) -> SemiOpenPolyhedron:
    return relatively_open(S.closure)


def closure(S: SemiOpenPolyhedron) -> Polyhedron:
    return S.closure


def is_empty(S: SemiOpenPolyhedron) -> bool:
    return S.is_empty


def affine_hull(S: SemiOpenPolyhedron) -> Tuple[Vector, List[Vector]]:
    if S.is_empty:
        raise EmptySet('empty set has no affine hull')
    return S.closure.affine_hull()


def recession_cone(P: Polyhedron) -> Polyhedron:
    return P.recession_cone()


def intersect(A: SemiOpenPolyhedron, B: SemiOpenPolyhedron) -> SemiOpenPolyhedron:
    A, B = _as_semi_open(A), _as_semi_open(B)
    if A.dim != B.dim:
        raise ValueError(f'dimension mismatch {A.dim} != {B.dim}')
    if A.is_empty or B.is_empty:
        return SemiOpenPolyhedron.empty(A.dim)
    H = A.closure.intersect(B.closure)
    return _realize(H, lambda x: A.member(x) and B.member(x))


def _ri_face_rows(P: Polyhedron, G: FaceId, shift: Optional[Sequence[Fraction]] = None):
    '''
    Rows describing ri of face G of P in the variable a, or of x - a when a
    shift x is given. Returns (strict, equalities).
    '''
    def rows(cons):
        if shift is None:
            return [(tuple(c), e) for c, e in cons]
        return [(neg(c), e - dot(c, shift)) for c, e in cons]

    strict = rows(con for i, con in enumerate(P.inequalities) if i not in G)
    eqs = rows(list(P.equalities) + [P.inequalities[i] for i in sorted(G)])
    return strict, eqs


def _sum_member(A: SemiOpenPolyhedron, B: Polyhedron, x: Sequence[Fraction]) -> bool:
    for G in A.included_faces():
        strict, eqs = _ri_face_rows(A.closure, G)
        b_ineqs = [(neg(c), e - dot(c, x)) for c, e in B.inequalities]
        b_eqs = [(neg(c), e - dot(c, x)) for c, e in B.equalities]
        if strict_point(A.dim, strict, b_ineqs, eqs + b_eqs) is not None:
            return True
    return False


def minkowski_sum(A: SemiOpenPolyhedron, B: Polyhedron) -> SemiOpenPolyhedron:
    '''A + B for a closed convex B'''
    A = _as_semi_open(A)
    if A.dim != B.dim:
        raise ValueError(f'dimension mismatch {A.dim} != {B.dim}')
    if A.is_empty or B.is_empty:
        return SemiOpenPolyhedron.empty(A.dim)
    if B.is_bounded and len(B.points) == 1 and not any(B.points[0]):
        return A
    H = A.closure.minkowski_sum(B)
    return _realize(H, lambda x: _sum_member(A, B, x))


def _hull(sets: Sequence[SemiOpenPolyhedron]) -> Polyhedron:
    return Polyhedron.from_v(
        sets[0].dim,
        [p for S in sets for p in S.closure.points],
        [r for S in sets for r in S.closure.rays],
        [v for S in sets for v in S.closure.lines])


Witness = List[Tuple[Fraction, Vector, int]]


def _reduce(witness: Witness) -> Witness:
    '''Drop terms until the points are affinely independent'''
    witness = [t for t in witness if t[0] > 0]
    while True:
        mu = kernel_vector([(Fraction(1), ) + tuple(p) for _, p, _ in witness])
        if mu is None:
            return witness
        if not any(c > 0 for c in mu):
            mu = neg(mu)
        alpha = min(w / c for (w, _, _), c in zip(witness, mu) if c > 0)
        witness = [(w - alpha * c, p, i) for (w, p, i), c in zip(witness, mu)]
        witness = [t for t in witness if t[0] > 0]


def _interior_combination(x: Sequence[Fraction],
                          sets: Sequence[Tuple[int, SemiOpenPolyhedron]]) -> Witness:
    '''
    x in the relative interior of the closed hull: write x as a combination
    with positive weight on a relative interior point of every set.
    '''
    d, k = len(x), len(sets)
    nvars = k + k * d
    strict: List[Constraint] = []
    ineqs: List[Constraint] = []
    eqs: List[Constraint] = []

    def row(lam_i=None, lam_c=Fraction(0), m_i=None, m_c=None):
        r = [Fraction(0)] * nvars
        if lam_i is not None:
            r[lam_i] = lam_c
        if m_i is not None:
            for j in range(d):
                r[k + m_i * d + j] = m_c[j]
        return tuple(r)

    for i, (_, S) in enumerate(sets):
        strict.append((row(lam_i=i, lam_c=Fraction(1)), Fraction(0)))
        for a, b in S.closure.inequalities:
            strict.append((row(lam_i=i, lam_c=-b, m_i=i, m_c=a), Fraction(0)))
        for a, b in S.closure.equalities:
            eqs.append((row(lam_i=i, lam_c=-b, m_i=i, m_c=a), Fraction(0)))
    eqs.append((tuple([Fraction(1)] * k + [Fraction(0)] * (k * d)), Fraction(1)))
    for j in range(d):
        r = [Fraction(0)] * nvars
        for i in range(k):
            r[k + i * d + j] = Fraction(1)
        eqs.append((tuple(r), Fraction(x[j])))
    sol = strict_point(nvars, strict, ineqs, eqs)
    if sol is None:
        raise HardError(f'{fmt_vector(x)} in the relative interior of the hull '
                        'but no interior combination exists')
    witness = []
    for i, (idx, _) in enumerate(sets):
        lam = sol[i]
        witness.append((lam, scale(1 / lam, sol[k + i * d:k + (i + 1) * d]), idx))
    return _reduce(witness)


def _hull_witness(x: Sequence[Fraction],
                  sets: Sequence[Tuple[int, SemiOpenPolyhedron]]) -> Optional[Witness]:
    sets = [(i, S) for i, S in sets if not S.is_empty]
    if not sets:
        return None
    H = _hull([S for _, S in sets])
    if not H.contains(x):
        return None
    F = H.tight_set(x)
    if F == H.top_face:
        return _interior_combination(x, sets)
    # the exposed face absorbs every combination that reaches x
    face = closed(H.face(F))
    return _hull_witness(x, [(i, intersect(S, face)) for i, S in sets])


def conv_union(sets: Sequence[SemiOpenPolyhedron], dim: Optional[int] = None) -> SemiOpenPolyhedron:
    '''Convex hull of a union of semi-open polyhedra'''
    sets = [_as_semi_open(S) for S in sets]
    if dim is None:
        if not sets:
            raise ValueError('conv_union of nothing needs a dimension')
        dim = sets[0].dim
    if any(S.dim != dim for S in sets):
        raise ValueError('dimension mismatch in conv_union')
    nonempty = [S for S in sets if not S.is_empty]
    if not nonempty:
        return SemiOpenPolyhedron.empty(dim)
    if len(nonempty) == 1:
        return nonempty[0]
    indexed = list(enumerate(nonempty))
    H = _hull(nonempty)
    return _realize(H, lambda x: _hull_witness(x, indexed) is not None)


def sharp(children: Sequence[SemiOpenPolyhedron], dim: Optional[int] = None) -> SemiOpenPolyhedron:
    return conv_union(children, dim)


def _child_face_tights(S: SemiOpenPolyhedron, hull: Polyhedron) -> List[FaceId]:
    return [hull.tight_set(S.closure.face_point(G)) for G in S.included_faces()]


def flat(children: Sequence[SemiOpenPolyhedron], sharp_set: SemiOpenPolyhedron) -> SemiOpenPolyhedron:
    '''
    Points y of the sharp set such that every child meets the smallest face
    of cl(sharp_set) containing y.
    '''
    if sharp_set.is_empty or any(S.is_empty for S in children):
        return SemiOpenPolyhedron.empty(sharp_set.dim)
    hull = sharp_set.closure
    tights = [_child_face_tights(S, hull) for S in children]

    def keep(y):
        if not sharp_set.member(y):
            return False
        F = hull.tight_set(y)
        return all(any(T >= F for T in child) for child in tights)

    return _realize(hull, keep)


def separate_cones(A: SemiOpenPolyhedron, B: SemiOpenPolyhedron,
                   emphasis: Optional[Iterable[Polyhedron]] = None) -> Vector:
    '''
    z with <x,z> <= 0 on A, <y,z> >= 0 on B and strict somewhere. The LP
    maximizes the total strictness over the generators of A and of the
    emphasis polyhedra (default: B).
    '''
    A, B = _as_semi_open(A), _as_semi_open(B)
    d = A.dim
    if A.is_empty or B.is_empty:
        raise NoSeparator('separation of an empty set')
    if not intersect(A, B).is_empty:
        raise NoSeparator('the sets intersect')
    ineqs: List[Constraint] = []
    eqs: List[Constraint] = []
    for g in A.closure.points + A.closure.rays:
        ineqs.append((neg(g), Fraction(0)))
    for g in B.closure.points + B.closure.rays:
        ineqs.append((tuple(g), Fraction(0)))
    for v in A.closure.lines + B.closure.lines:
        eqs.append((tuple(v), Fraction(0)))
    for j in range(d):
        e = tuple(Fraction(int(i == j)) for i in range(d))
        ineqs.append((e, Fraction(-1)))
        ineqs.append((neg(e), Fraction(-1)))
    objective = zeros(d)
    for g in A.closure.points + A.closure.rays:
        objective = sub(objective, g)
    targets = [B.closure] if emphasis is None else list(emphasis)
    for P in targets:
        for g in P.points + P.rays:
            objective = add(objective, g)
    res = lp_maximize(d, objective, ineqs, eqs)
    if not res.optimal or res.value <= 0:
        raise NoSeparator('no proper separator found')
    logger.debug('separator %s with margin %s', fmt_vector(res.solution), res.value)
    return res.solution


def caratheodory_decompose(x: Sequence[Fraction],
                           children: Sequence[SemiOpenPolyhedron]) -> Witness:
    '''
    At most d+1 triples (weight, point, child index) with positive weights
    summing to one, each point a member of its child, reconstructing x.
    '''
    witness = _hull_witness(vector(x), list(enumerate(children)))
    if witness is None:
        raise NotMember(f'{fmt_vector(x)} is not in the convex hull of the children')
    return witness


def sample_ri_point(S: SemiOpenPolyhedron) -> Vector:
    if S.is_empty:
        raise EmptySet('cannot sample from an empty set')
    return S.closure.face_point(S.closure.top_face)


def random_ri_points(S: SemiOpenPolyhedron, rng: random.Random, count: int = 1,
                     face: Optional[FaceId] = None, denominator: int = 16) -> List[Vector]:
    '''Random rational points of the relative interior of a face (default: top)'''
    P = S.closure
    if P.is_empty:
        raise EmptySet('cannot sample from an empty set')
    if face is None:
        face = P.top_face
    pts, rs, lines = P.face_generators(face)
    out = []
    for _ in range(count):
        wp = [Fraction(rng.randint(1, denominator)) for _ in pts]
        total = sum(wp)
        x = combination([w / total for w in wp], pts, P.dim)
        for r in rs:
            x = add(x, scale(Fraction(rng.randint(1, denominator), denominator), r))
        for v in lines:
            x = add(x, scale(Fraction(rng.randint(-denominator, denominator), denominator), v))
        out.append(x)
    return out


__all__ = [
    'ClosureViolation',
    'EmptySet',
    'HardError',
    'NoSeparator',
    'NotMember',
    'SemiOpenPolyhedron',
    'affine_hull',
    'caratheodory_decompose',
    'closed',
    'closure',
    'conv_union',
    'decompose_sum',
    'flat',
    'intersect',
    'is_empty',
    'member',
    'minimal_face',
    'minkowski_sum',
    'polar_cone',
    'random_ri_points',
    'recession_cone',
    'relative_interior',
    'relatively_open',
    'sample_ri_point',
    'separate_cones',
    'sharp',
]
