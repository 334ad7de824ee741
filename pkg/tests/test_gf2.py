import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sosdecoder import build_rotated_surface, gf2

bit_matrices = st.integers(1, 6).flatmap(
    lambda r: st.integers(1, 8).flatmap(lambda c: arrays(np.uint8, (r, c), elements=st.integers(0, 1)))
)

TRIANGLE = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=np.uint8)


def _brute_rank(m):
    # number of distinct vectors in the row span is 2^rank
    rows = [int("".join(map(str, r)), 2) for r in m]
    span = {0}
    for r in rows:
        span |= {x ^ r for x in span}
    return int(np.log2(len(span)))


def test_rref_identity_and_zero():
    _, piv, rk = gf2.rref(np.eye(3, dtype=np.uint8))
    assert rk == 3 and piv == [0, 1, 2]
    _, piv, rk = gf2.rref(np.zeros((2, 4), dtype=np.uint8))
    assert rk == 0 and piv == []


def test_rank_triangle():
    assert gf2.rank(TRIANGLE) == 2


def test_solve_examples():
    e = gf2.solve(np.array([[1, 1]]), np.array([1]))
    assert gf2.matvec(np.array([[1, 1]]), e).tolist() == [1]
    s = np.array([1, 0, 1], dtype=np.uint8)
    assert gf2.solve(np.eye(3, dtype=np.uint8), s).tolist() == s.tolist()
    assert gf2.solve(TRIANGLE, np.array([1, 1, 1])) is None


def test_nullspace_examples():
    assert gf2.nullspace_basis(np.array([[1, 1]])).tolist() == [[1, 1]]
    assert gf2.nullspace_basis(np.eye(4, dtype=np.uint8)).shape == (0, 4)
    code = build_rotated_surface(3)
    assert gf2.nullspace_basis(code.hz).shape[0] == 5


def test_in_rowspace_examples():
    code = build_rotated_surface(3)
    assert gf2.in_rowspace(code.hz, code.hz[1])
    assert gf2.in_rowspace(code.hz, np.zeros(9, dtype=np.uint8))
    assert not gf2.in_rowspace(code.hz, code.logicals_z[0])


def test_dimension_errors():
    with pytest.raises(ValueError):
        gf2.matvec(np.eye(2, dtype=np.uint8), np.zeros(3, dtype=np.uint8))
    with pytest.raises(ValueError):
        gf2.solve(np.eye(2, dtype=np.uint8), np.zeros(3, dtype=np.uint8))
    with pytest.raises(ValueError):
        gf2.as_bits([[0, 2]])


@settings(max_examples=80, deadline=None)
@given(bit_matrices)
def test_rank_matches_span_count(m):
    assert gf2.rank(m) == _brute_rank(m)


@settings(max_examples=80, deadline=None)
@given(bit_matrices)
def test_rank_nullity(m):
    ker = gf2.nullspace_basis(m)
    assert gf2.rank(m) + ker.shape[0] == m.shape[1]
    assert not gf2.matmul(m, ker.T).any()


@settings(max_examples=80, deadline=None)
@given(bit_matrices, st.data())
def test_solve_roundtrip(m, data):
    x = data.draw(arrays(np.uint8, m.shape[1], elements=st.integers(0, 1)))
    s = gf2.matvec(m, x)
    e = gf2.solve(m, s)
    assert e is not None and np.array_equal(gf2.matvec(m, e), s)


@settings(max_examples=60, deadline=None)
@given(bit_matrices, st.data())
def test_rowspace_membership(m, data):
    coeffs = data.draw(arrays(np.uint8, m.shape[0], elements=st.integers(0, 1)))
    v = gf2.matvec(m.T, coeffs)
    assert gf2.in_rowspace(m, v)
