'''
Exact rational scalars and small dense vectors.

Distributed under the terms of the GNU General Public License v2 or later

Scalars are fractions.Fraction throughout; vectors are plain tuples of
Fraction so they hash and compare exactly.

    >>> from rational import Q, vector, fmt
    >>> fmt(Q("2/4") + 1)
    '3/2'
    >>> vector(["1/3", 2])
    (Fraction(1, 3), Fraction(2, 1))
'''

from fractions import Fraction
from math import gcd
from typing import (
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

Scalar = Fraction
Vector = Tuple[Fraction, ...]
RationalLike = Union[int, str, Fraction]


def Q(value: RationalLike) -> Fraction:
    '''Parse an exact rational from int, Fraction or "p/q" text'''
    if isinstance(value, bool):
        raise TypeError('bool is not a rational')
    if isinstance(value, float):
        raise TypeError(f'floats are not accepted: {value!r}')
    if isinstance(value, str):
        value = value.strip()
    return Fraction(value)


def vector(values: Iterable[RationalLike]) -> Vector:
    return tuple(Q(v) for v in values)


def fmt(x: Fraction) -> str:
    '''Canonical text form: "p" for integers, else "p/q"'''
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f'{x.numerator}/{x.denominator}'


def fmt_vector(v: Sequence[Fraction]) -> List[str]:
    return [fmt(c) for c in v]


def zeros(d: int) -> Vector:
    return (Fraction(0), ) * d


def unit(d: int, i: int) -> Vector:
    return tuple(Fraction(int(k == i)) for k in range(d))


def add(u: Sequence[Fraction], v: Sequence[Fraction]) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def sub(u: Sequence[Fraction], v: Sequence[Fraction]) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def neg(v: Sequence[Fraction]) -> Vector:
    return tuple(-a for a in v)


def scale(c: Fraction, v: Sequence[Fraction]) -> Vector:
    return tuple(c * a for a in v)


def dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def is_zero(v: Sequence[Fraction]) -> bool:
    return all(a == 0 for a in v)


def combination(weights: Sequence[Fraction],
                vectors: Sequence[Sequence[Fraction]],
                d: Optional[int] = None) -> Vector:
    '''Sum of weights[i] * vectors[i]'''
    if d is None:
        d = len(vectors[0])
    out = [Fraction(0)] * d
    for w, v in zip(weights, vectors):
        if w:
            for k in range(d):
                out[k] += w * v[k]
    return tuple(out)


def primitive(v: Sequence[Fraction]) -> Vector:
    '''
    Scale a nonzero rational vector to the coprime integer vector with the
    same direction. Zero vectors are returned unchanged.
    '''
    if is_zero(v):
        return tuple(Fraction(a) for a in v)
    lcm = 1
    for a in v:
        den = Fraction(a).denominator
        lcm = lcm * den // gcd(lcm, den)
    ints = [int(Fraction(a) * lcm) for a in v]
    g = 0
    for a in ints:
        g = gcd(g, abs(a))
    return tuple(Fraction(a // g) for a in ints)


def _echelon(rows: Sequence[Sequence[Fraction]]) -> Tuple[List[List[Fraction]], List[int]]:
    m = [list(map(Fraction, r)) for r in rows]
    pivots: List[int] = []
    if not m:
        return m, pivots
    ncols = len(m[0])
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [a * inv for a in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(vectors: Sequence[Sequence[Fraction]]) -> int:
    return len(_echelon(vectors)[1])


def row_basis(vectors: Sequence[Sequence[Fraction]]) -> List[Vector]:
    '''Linearly independent subset spanning the same space, in input order'''
    basis: List[Vector] = []
    for v in vectors:
        if rank(basis + [tuple(v)]) > len(basis):
            basis.append(tuple(Fraction(a) for a in v))
    return basis


def kernel_vector(vectors: Sequence[Sequence[Fraction]]) -> Optional[Vector]:
    '''
    Nonzero coefficients mu with sum(mu[i] * vectors[i]) == 0, or None if
    the vectors are linearly independent.
    '''
    n = len(vectors)
    if n == 0:
        return None
    d = len(vectors[0])
    # columns are the input vectors
    m, pivots = _echelon([[vectors[j][i] for j in range(n)] for i in range(d)])
    free = [j for j in range(n) if j not in pivots]
    if not free:
        return None
    f = free[0]
    mu = [Fraction(0)] * n
    mu[f] = Fraction(1)
    for row, p in zip(m, pivots):
        mu[p] = -row[f]
    return tuple(mu)


def nullspace(vectors: Sequence[Sequence[Fraction]], d: int) -> List[Vector]:
    '''Basis of {y : y.v == 0 for every v in vectors}'''
    m, pivots = _echelon(vectors) if vectors else ([], [])
    basis: List[Vector] = []
    for f in range(d):
        if f in pivots:
            continue
        y = [Fraction(0)] * d
        y[f] = Fraction(1)
        for row, p in zip(m, pivots):
            y[p] = -row[f]
        basis.append(tuple(y))
    return basis
