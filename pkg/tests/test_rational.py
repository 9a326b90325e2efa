from fractions import Fraction

import pytest

import rational as m


def test_Q():
    assert m.Q(3) == 3
    assert m.Q("1/2") == Fraction(1, 2)
    assert m.Q(" -3/4 ") == Fraction(-3, 4)
    with pytest.raises(TypeError):
        m.Q(0.5)
    with pytest.raises(TypeError):
        m.Q(True)


def test_fmt():
    assert m.fmt(Fraction(4, 2)) == "2"
    assert m.fmt(Fraction(-1, 3)) == "-1/3"
    assert m.fmt_vector(m.vector([1, "2/4"])) == ["1", "1/2"]


def test_arithmetic():
    u = m.vector([1, 2])
    v = m.vector(["1/2", -1])
    assert m.add(u, v) == m.vector(["3/2", 1])
    assert m.sub(u, v) == m.vector(["1/2", 3])
    assert m.neg(v) == m.vector(["-1/2", 1])
    assert m.scale(2, v) == m.vector([1, -2])
    assert m.dot(u, v) == Fraction(-3, 2)
    assert m.zeros(3) == (0, 0, 0)
    assert m.unit(3, 1) == (0, 1, 0)
    assert m.is_zero(m.zeros(2))
    assert m.combination([Fraction(1, 2), Fraction(1, 2)], [u, v]) == m.vector(["3/4", "1/2"])


def test_primitive():
    assert m.primitive(m.vector(["1/2", "3/4"])) == (2, 3)
    assert m.primitive(m.vector([-4, 6])) == (-2, 3)
    assert m.primitive(m.zeros(2)) == (0, 0)


def test_rank_and_kernel():
    vs = [m.vector([1, 0]), m.vector([0, 1]), m.vector([1, 1])]
    assert m.rank(vs) == 2
    assert m.row_basis(vs) == vs[:2]
    mu = m.kernel_vector(vs)
    assert mu is not None and any(mu)
    assert m.combination(mu, vs) == m.zeros(2)
    assert m.kernel_vector(vs[:2]) is None


def test_nullspace():
    basis = m.nullspace([m.vector([1, 1, 0])], 3)
    assert len(basis) == 2
    for y in basis:
        assert m.dot(y, m.vector([1, 1, 0])) == 0
    assert m.rank(basis) == 2
    assert m.nullspace([], 2) == [m.unit(2, 0), m.unit(2, 1)]
