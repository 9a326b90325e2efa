'''
Closed rational polyhedra in double description, on top of pycddlib.

Distributed under the terms of the GNU General Public License v2 or later

A Polyhedron keeps both representations:

    H: a.x >= b for every (a, b) in inequalities, a.x == b for equalities
    V: conv(points) + cone(rays) + span(lines)

Both are minimal, so a face is identified by the set of inequality indices
that are tight on its relative interior (FaceId). The top face has the empty
tight set.

    >>> square = Polyhedron.box(2, 0, 1)
    >>> sorted(minimal_face(square, vector([0, "1/2"])))
    [0]
'''

import itertools
import logging
import threading
from fractions import Fraction
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import cdd

from rational import (
    Vector,
    add,
    dot,
    fmt_vector,
    fmt,
    is_zero,
    neg,
    primitive,
    rank,
    row_basis,
    scale,
    sub,
    zeros,
)

logger = logging.getLogger(__name__)

NUMBER_TYPE = 'fraction'

# upper bound of the uniform slack variable in strict feasibility LPs
LP_SLACK_CAP = 1

Constraint = Tuple[Vector, Fraction]
FaceId = FrozenSet[int]

_faces_lock = threading.Lock()


class NotMember(ValueError):
    pass


class NotACone(ValueError):
    pass


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _normalized(a: Sequence[Fraction], b: Fraction) -> Constraint:
    row = primitive(tuple(a) + (b, ))
    return row[:-1], row[-1]


def _h_matrix(dim: int, inequalities: Sequence[Constraint],
              equalities: Sequence[Constraint]):
    # leading 1 >= 0 row keeps the matrix nonempty
    rows = [[Fraction(1)] + [Fraction(0)] * dim]
    rows += [[-b] + list(a) for a, b in inequalities]
    mat = cdd.Matrix(rows, number_type=NUMBER_TYPE)
    if equalities:
        mat.extend([[-b] + list(a) for a, b in equalities], linear=True)
    mat.rep_type = cdd.RepType.INEQUALITY
    return mat


def _h_to_v(dim, inequalities, equalities):
    gen = cdd.Polyhedron(_h_matrix(dim, inequalities, equalities)).get_generators()
    points: List[Vector] = []
    rays: List[Vector] = []
    lines: List[Vector] = []
    for i in range(gen.row_size):
        row = [_frac(c) for c in gen[i]]
        t, v = row[0], tuple(row[1:])
        if i in gen.lin_set:
            lines.append(primitive(v))
        elif t == 0:
            if not is_zero(v):
                rays.append(primitive(v))
        else:
            points.append(tuple(c / t for c in v))
    return points, rays, lines


def _v_to_h(dim, points, rays, lines):
    assert points, 'V-representation needs at least one point'
    rows = [[Fraction(1)] + list(p) for p in points]
    rows += [[Fraction(0)] + list(r) for r in rays]
    mat = cdd.Matrix(rows, number_type=NUMBER_TYPE)
    if lines:
        mat.extend([[Fraction(0)] + list(v) for v in lines], linear=True)
    mat.rep_type = cdd.RepType.GENERATOR
    hmat = cdd.Polyhedron(mat).get_inequalities()
    inequalities: List[Constraint] = []
    equalities: List[Constraint] = []
    for i in range(hmat.row_size):
        row = [_frac(c) for c in hmat[i]]
        a, b = tuple(row[1:]), -row[0]
        if is_zero(a):
            # 0 >= b, only the homogenizing row shows up here
            continue
        con = _normalized(a, b)
        if i in hmat.lin_set:
            if con not in equalities and (neg(con[0]), -con[1]) not in equalities:
                equalities.append(con)
        elif con not in inequalities:
            inequalities.append(con)
    return inequalities, equalities


class Polyhedron:
    '''
    Closed convex polyhedron with exact double description. Instances are
    immutable; build them with from_h, from_v or the helper constructors.
    '''

    __slots__ = ('dim', 'inequalities', 'equalities', 'points', 'rays', 'lines',
                 '_point_tight', '_ray_tight', '_faces', '__weakref__')

    def __init__(self, dim: int, inequalities: Sequence[Constraint],
                 equalities: Sequence[Constraint], points: Sequence[Vector],
                 rays: Sequence[Vector], lines: Sequence[Vector]):
        self.dim = dim
        self.inequalities: Tuple[Constraint, ...] = tuple(inequalities)
        self.equalities: Tuple[Constraint, ...] = tuple(equalities)
        self.points: Tuple[Vector, ...] = tuple(points)
        self.rays: Tuple[Vector, ...] = tuple(rays)
        self.lines: Tuple[Vector, ...] = tuple(lines)
        self._point_tight = tuple(
            frozenset(j for j, p in enumerate(self.points) if dot(a, p) == b)
            for a, b in self.inequalities)
        self._ray_tight = tuple(
            frozenset(j for j, r in enumerate(self.rays) if dot(a, r) == 0)
            for a, _ in self.inequalities)
        self._faces: Optional[Tuple[FaceId, ...]] = None

    # constructors

    @classmethod
    def from_h(cls, dim: int, inequalities: Iterable[Constraint] = (),
               equalities: Iterable[Constraint] = ()) -> 'Polyhedron':
        ineqs = [(tuple(map(Fraction, a)), Fraction(b)) for a, b in inequalities]
        eqs = [(tuple(map(Fraction, a)), Fraction(b)) for a, b in equalities]
        for a, _ in ineqs + eqs:
            if len(a) != dim:
                raise ValueError(f'constraint of length {len(a)} in dimension {dim}')
        points, rays, lines = _h_to_v(dim, ineqs, eqs)
        if not points:
            return cls.empty(dim)
        h_ineqs, h_eqs = _v_to_h(dim, points, rays, lines)
        return cls(dim, h_ineqs, h_eqs, points, rays, lines)

    @classmethod
    def from_v(cls, dim: int, points: Iterable[Sequence] = (), rays: Iterable[Sequence] = (),
               lines: Iterable[Sequence] = ()) -> 'Polyhedron':
        pts = [tuple(map(Fraction, p)) for p in points]
        rs = [tuple(map(Fraction, r)) for r in rays]
        ls = [tuple(map(Fraction, v)) for v in lines]
        for v in pts + rs + ls:
            if len(v) != dim:
                raise ValueError(f'generator of length {len(v)} in dimension {dim}')
        if not pts:
            if rs or ls:
                raise ValueError('rays without a point do not define a polyhedron')
            return cls.empty(dim)
        rs = [r for r in rs if not is_zero(r)]
        ls = [v for v in ls if not is_zero(v)]
        h_ineqs, h_eqs = _v_to_h(dim, pts, rs, ls)
        points, rays, lines = _h_to_v(dim, h_ineqs, h_eqs)
        return cls(dim, h_ineqs, h_eqs, points, rays, lines)

    @classmethod
    def empty(cls, dim: int) -> 'Polyhedron':
        return cls(dim, [(zeros(dim), Fraction(1))], [], [], [], [])

    @classmethod
    def whole(cls, dim: int) -> 'Polyhedron':
        return cls(dim, [], [], [zeros(dim)], [],
                   [tuple(Fraction(int(i == k)) for i in range(dim)) for k in range(dim)])

    @classmethod
    def point(cls, x: Sequence) -> 'Polyhedron':
        x = tuple(map(Fraction, x))
        return cls.from_v(len(x), points=[x])

    @classmethod
    def origin(cls, dim: int) -> 'Polyhedron':
        return cls.point(zeros(dim))

    @classmethod
    def cone(cls, dim: int, rays: Iterable[Sequence] = (),
             lines: Iterable[Sequence] = ()) -> 'Polyhedron':
        '''Closed convex cone generated by rays and lines'''
        return cls.from_v(dim, points=[zeros(dim)], rays=rays, lines=lines)

    @classmethod
    def orthant(cls, dim: int) -> 'Polyhedron':
        return cls.cone(dim, rays=[tuple(Fraction(int(i == k)) for i in range(dim))
                                   for k in range(dim)])

    @classmethod
    def box(cls, dim: int, lo=-1, hi=1) -> 'Polyhedron':
        lo, hi = Fraction(lo), Fraction(hi)
        return cls.from_v(dim, points=itertools.product((lo, hi), repeat=dim))

    # queries

    def __repr__(self):
        if self.is_empty:
            return f'<Polyhedron dim={self.dim} empty>'
        return (f'<Polyhedron dim={self.dim} {len(self.inequalities)} ineq '
                f'{len(self.equalities)} eq, {len(self.points)} points '
                f'{len(self.rays)} rays {len(self.lines)} lines>')

    @property
    def is_empty(self) -> bool:
        return not self.points

    @property
    def is_bounded(self) -> bool:
        return not self.rays and not self.lines

    def contains(self, x: Sequence[Fraction]) -> bool:
        if self.is_empty:
            return False
        return (all(dot(a, x) >= b for a, b in self.inequalities)
                and all(dot(a, x) == b for a, b in self.equalities))

    __contains__ = contains

    def contains_direction(self, r: Sequence[Fraction]) -> bool:
        '''r lies in the recession cone'''
        return (all(dot(a, r) >= 0 for a, _ in self.inequalities)
                and all(dot(a, r) == 0 for a, _ in self.equalities))

    def contains_polyhedron(self, other: 'Polyhedron') -> bool:
        if other.is_empty:
            return True
        return (all(self.contains(p) for p in other.points)
                and all(self.contains_direction(r) for r in other.rays)
                and all(self.contains_direction(v) and self.contains_direction(neg(v))
                        for v in other.lines))

    def same_set(self, other: 'Polyhedron') -> bool:
        return self.contains_polyhedron(other) and other.contains_polyhedron(self)

    def in_interior(self, x: Sequence[Fraction]) -> bool:
        '''x in the (full-dimensional) interior'''
        return (not self.is_empty and not self.equalities
                and all(dot(a, x) > b for a, b in self.inequalities))

    def in_relative_interior(self, x: Sequence[Fraction]) -> bool:
        return self.contains(x) and self.tight_set(x) == self.top_face

    def tight_set(self, x: Sequence[Fraction]) -> FaceId:
        return frozenset(i for i, (a, b) in enumerate(self.inequalities)
                         if dot(a, x) == b)

    @property
    def affine_dimension(self) -> int:
        if self.is_empty:
            return -1
        return self.face_dimension(self.top_face)

    @property
    def is_cone(self) -> bool:
        if self.is_empty or not self.contains(zeros(self.dim)):
            return False
        return all(self.contains_direction(p) for p in self.points)

    # faces

    def _face_generators(self, face: FaceId) -> Tuple[List[Vector], List[Vector]]:
        pts = set(range(len(self.points)))
        rs = set(range(len(self.rays)))
        for i in face:
            pts &= self._point_tight[i]
            rs &= self._ray_tight[i]
        return [self.points[j] for j in sorted(pts)], [self.rays[j] for j in sorted(rs)]

    def _closure(self, face: Iterable[int]) -> Optional[FaceId]:
        pts, rs = self._face_generators(frozenset(face))
        if not pts:
            return None
        return frozenset(i for i, (a, b) in enumerate(self.inequalities)
                         if all(dot(a, p) == b for p in pts) and all(dot(a, r) == 0 for r in rs))

    @property
    def top_face(self) -> FaceId:
        top = self._closure(())
        return frozenset() if top is None else top

    def faces(self) -> Tuple[FaceId, ...]:
        '''All nonempty faces, largest dimension first'''
        if self._faces is not None:
            return self._faces
        with _faces_lock:
            if self._faces is None:
                self._faces = self._enumerate_faces()
        return self._faces

    def _enumerate_faces(self) -> Tuple[FaceId, ...]:
        if self.is_empty:
            return ()
        seen = {self.top_face}
        queue = [self.top_face]
        for face in queue:
            for i in range(len(self.inequalities)):
                if i in face:
                    continue
                sub_face = self._closure(face | {i})
                if sub_face is not None and sub_face not in seen:
                    seen.add(sub_face)
                    queue.append(sub_face)
        return tuple(
            sorted(seen, key=lambda f: (-self.face_dimension(f), len(f), sorted(f))))

    def face_dimension(self, face: FaceId) -> int:
        pts, rs = self._face_generators(face)
        if not pts:
            return -1
        dirs = [sub(p, pts[0]) for p in pts[1:]] + rs + list(self.lines)
        return rank(dirs) if dirs else 0

    def face_point(self, face: FaceId, alternate: bool = False) -> Vector:
        '''
        A point of the relative interior of the face: strictly positive
        combination of all its generators. With alternate=True a different
        interior point (unequal weights) is returned.
        '''
        pts, rs = self._face_generators(face)
        if not pts:
            raise NotMember(f'face {sorted(face)} is empty')
        if alternate:
            wp = [Fraction(k + 1) for k in range(len(pts))]
            wr = [Fraction(k + 2) for k in range(len(rs))]
        else:
            wp = [Fraction(1)] * len(pts)
            wr = [Fraction(1)] * len(rs)
        total = sum(wp)
        x = zeros(self.dim)
        for w, p in zip(wp, pts):
            x = add(x, scale(w / total, p))
        for w, r in zip(wr, rs):
            x = add(x, scale(w, r))
        return x

    def face_generators(self, face: FaceId) -> Tuple[List[Vector], List[Vector], List[Vector]]:
        pts, rs = self._face_generators(face)
        return pts, rs, list(self.lines)

    def face(self, face: FaceId) -> 'Polyhedron':
        if face == self.top_face:
            return self
        pts, rs = self._face_generators(face)
        return Polyhedron.from_v(self.dim, pts, rs, self.lines)

    # constructions

    def intersect(self, other: 'Polyhedron') -> 'Polyhedron':
        if self.is_empty or other.is_empty:
            return Polyhedron.empty(self.dim)
        return Polyhedron.from_h(self.dim, self.inequalities + other.inequalities,
                                 self.equalities + other.equalities)

    def minkowski_sum(self, other: 'Polyhedron') -> 'Polyhedron':
        if self.is_empty or other.is_empty:
            return Polyhedron.empty(self.dim)
        return Polyhedron.from_v(self.dim, [add(p, q) for p in self.points for q in other.points],
                                 self.rays + other.rays, self.lines + other.lines)

    def negate(self) -> 'Polyhedron':
        if self.is_empty:
            return self
        return Polyhedron.from_v(self.dim, [neg(p) for p in self.points],
                                 [neg(r) for r in self.rays], self.lines)

    def translate(self, v: Sequence[Fraction]) -> 'Polyhedron':
        if self.is_empty:
            return self
        return Polyhedron.from_v(self.dim, [add(p, v) for p in self.points], self.rays,
                                 self.lines)

    def product(self, other: 'Polyhedron') -> 'Polyhedron':
        '''Cartesian product self x other'''
        d1, d2 = self.dim, other.dim
        if self.is_empty or other.is_empty:
            return Polyhedron.empty(d1 + d2)
        return Polyhedron.from_v(
            d1 + d2, [p + q for p in self.points for q in other.points],
            [r + zeros(d2) for r in self.rays] + [zeros(d1) + r for r in other.rays],
            [v + zeros(d2) for v in self.lines] + [zeros(d1) + v for v in other.lines])

    def recession_cone(self) -> 'Polyhedron':
        if self.is_empty:
            return self
        return Polyhedron.cone(self.dim, self.rays, self.lines)

    def affine_hull(self) -> Tuple[Vector, List[Vector]]:
        if self.is_empty:
            raise NotMember('empty polyhedron has no affine hull')
        p0 = self.points[0]
        dirs = [sub(p, p0) for p in self.points[1:]] + list(self.rays) + list(self.lines)
        return p0, row_basis([d for d in dirs if not is_zero(d)])

    def describe(self) -> Dict[str, object]:
        '''Serializable H and V description with "p/q" rationals'''
        return {
            'dim': self.dim,
            'inequalities': [{'normal': fmt_vector(a), 'offset': fmt(b), 'relation': '>='}
                             for a, b in self.inequalities] +
            [{'normal': fmt_vector(a), 'offset': fmt(b), 'relation': '='}
             for a, b in self.equalities],
            'points': [fmt_vector(p) for p in self.points],
            'rays': [fmt_vector(r) for r in self.rays],
            'lineality': [fmt_vector(v) for v in self.lines],
        }


def minimal_face(P: Polyhedron, x: Sequence[Fraction]) -> FaceId:
    '''Tight-inequality set at x, which names the smallest face containing x'''
    if not P.contains(x):
        raise NotMember(f'{fmt_vector(x)} not in {P!r}')
    return P.tight_set(x)


def recession_cone(P: Polyhedron) -> Polyhedron:
    return P.recession_cone()


def polar_cone(P: Polyhedron) -> Polyhedron:
    '''Positive polar {y : <y,x> >= 0 for all x in P}'''
    if not P.is_cone:
        raise NotACone(f'{P!r} is not a cone')
    inequalities = [(g, Fraction(0)) for g in P.points + P.rays if not is_zero(g)]
    equalities = [(v, Fraction(0)) for v in P.lines]
    return Polyhedron.from_h(P.dim, inequalities, equalities)


# linear programming


class LPResult(NamedTuple):
    status: str
    value: Optional[Fraction]
    solution: Optional[Vector]

    @property
    def optimal(self) -> bool:
        return self.status == 'optimal'


def lp_maximize(nvars: int, objective: Sequence[Fraction],
                inequalities: Sequence[Constraint] = (),
                equalities: Sequence[Constraint] = ()) -> LPResult:
    '''
    Exact LP: maximize objective.x subject to a.x >= b (inequalities) and
    a.x == b (equalities). Status is "optimal", "infeasible" or "unbounded".
    '''
    mat = _h_matrix(nvars, inequalities, equalities)
    mat.obj_type = cdd.LPObjType.MAX
    mat.obj_func = [Fraction(0)] + [Fraction(c) for c in objective]
    lp = cdd.LinProg(mat)
    lp.solve()
    if lp.status == cdd.LPStatusType.OPTIMAL:
        return LPResult('optimal', _frac(lp.obj_value),
                        tuple(_frac(c) for c in lp.primal_solution))
    if lp.status in (cdd.LPStatusType.INCONSISTENT, cdd.LPStatusType.STRUC_INCONSISTENT):
        return LPResult('infeasible', None, None)
    return LPResult('unbounded', None, None)


def strict_point(nvars: int, strict: Sequence[Constraint],
                 inequalities: Sequence[Constraint] = (),
                 equalities: Sequence[Constraint] = ()) -> Optional[Vector]:
    '''
    A point satisfying every strict row with a.x > b and the remaining rows
    as given, or None. Decided by maximizing a uniform slack t <= LP_SLACK_CAP.
    '''
    ext = lambda rows: [(tuple(a) + (Fraction(0), ), b) for a, b in rows]
    rows = [(tuple(a) + (Fraction(-1), ), b) for a, b in strict]
    rows += ext(inequalities)
    rows.append((zeros(nvars) + (Fraction(-1), ), Fraction(-LP_SLACK_CAP)))
    objective = zeros(nvars) + (Fraction(1), )
    res = lp_maximize(nvars + 1, objective, rows, ext(equalities))
    if not res.optimal or res.value <= 0:
        return None
    return res.solution[:nvars]


def decompose_sum(z: Sequence[Fraction], A: Polyhedron,
                  B: Polyhedron) -> Tuple[Vector, Vector]:
    '''Witness a in A, b in B with a + b == z'''
    d = len(z)
    if A.is_empty or B.is_empty:
        raise NotMember('sum with an empty set')
    # variables: a; constraint z - a in B
    ineqs = list(A.inequalities) + [(neg(c), e - dot(c, z)) for c, e in B.inequalities]
    eqs = list(A.equalities) + [(neg(c), e - dot(c, z)) for c, e in B.equalities]
    res = lp_maximize(d, zeros(d), ineqs, eqs)
    if not res.optimal:
        raise NotMember(f'{fmt_vector(z)} not in the sum')
    a = res.solution
    return a, sub(z, a)
