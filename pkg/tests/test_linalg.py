from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srcartan.errors import ContactDegeneracy
from srcartan.linalg import (QuotientModel, Subspace, block_form, kernel, least_squares_solve,
                             orthogonal_complement, rank, rref, skew_normal_form)

F = Fraction


def rational_matrices(max_rows=12, max_cols=60):
    return st.integers(1, max_rows).flatmap(lambda r: st.integers(1, max_cols).flatmap(
        lambda c: st.lists(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=4),
                                    min_size=c, max_size=c), min_size=r, max_size=r)))


def test_rref_identity_and_zero():
    eye = [[F(int(i == j)) for j in range(3)] for i in range(3)]
    assert rref(eye) == (eye, 3)
    zero = [[0] * 5 for _ in range(2)]
    red, r = rref(zero)
    assert r == 0 and all(x == 0 for row in red for x in row)


def test_rref_known_matrix():
    red, r = rref([[2, 4, 6], [1, 2, 4]])
    assert r == 2
    assert red == [[1, 2, 0], [0, 0, 1]]


def test_kernel_examples():
    assert kernel([[1, 0], [0, 1]]).dim == 0
    k = kernel([[1, 1]])
    assert k.basis == ((F(1), F(-1)),)


def test_orthogonal_complement_examples():
    s = Subspace.span(2, [[1, 0]])
    assert orthogonal_complement(s).basis == ((F(0), F(1)),)
    whole = Subspace.span(3, np.eye(3, dtype=int).tolist())
    assert orthogonal_complement(whole).dim == 0
    # a non-standard gram tilts the complement
    c = orthogonal_complement(s, [[2, 1], [1, 1]])
    assert c.basis == ((F(1), F(-2)),)


def test_orthogonal_complement_rejects_bad_gram():
    s = Subspace.span(2, [[1, 0]])
    with pytest.raises(ValueError):
        orthogonal_complement(s, [[1, 1], [1, 1]])
    with pytest.raises(ValueError):
        orthogonal_complement(s, [[1, 2], [0, 1]])


def test_least_squares_examples():
    t = np.array([3.0, -1.0, 2.0])
    assert np.allclose(least_squares_solve(np.eye(3), t), t)
    assert least_squares_solve(np.array([[1.0], [1.0]]), np.array([1.0, 3.0])) == pytest.approx([2.0])
    # rank deficient: minimum-norm solution
    x = least_squares_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([2.0, 2.0]))
    assert np.allclose(x, [1.0, 1.0])


def test_skew_normal_form_examples():
    j2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    p, lam = skew_normal_form(j2)
    assert np.allclose(p, np.eye(2)) and lam == pytest.approx([1.0])
    _, lam = skew_normal_form(3 * j2)
    assert lam == pytest.approx([3.0])


def test_skew_normal_form_rotated_blocks():
    rng = np.random.default_rng(7)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    omega = q @ block_form([2.0, 5.0]) @ q.T
    p, lam = skew_normal_form(omega)
    assert lam == pytest.approx([5.0, 2.0])
    assert np.abs(p.T @ p - np.eye(4)).max() < 1e-9
    assert np.abs(p.T @ omega @ p - block_form(lam)).max() < 1e-9
    # eigenvalues of omega are +-5i, +-2i
    assert sorted(np.abs(np.linalg.eigvals(omega).imag)) == pytest.approx([2, 2, 5, 5])


def test_skew_normal_form_degenerate():
    with pytest.raises(ContactDegeneracy):
        skew_normal_form(np.zeros((2, 2)))
    with pytest.raises(ContactDegeneracy):
        skew_normal_form(block_form([1.0, 0.0]))


def test_quotient_model_projector():
    ker = Subspace.span(3, [[1, 1, 0]])
    q = QuotientModel.build(ker, [[1, 0, 0], [0, 0, 1], [0, 1, 0]])
    assert q.dim == 2
    proj = np.array(q.projector, dtype=object)
    assert all(x == 0 for x in proj.dot(np.array([1, 1, 0], dtype=object)))
    for s in q.section:
        assert list(proj.dot(np.array(s, dtype=object))) == list(s)
    assert (proj.dot(proj) == proj).all()
    assert q.coords([1, 1, 0]) == [0, 0]
    assert q.coords([0, 1, 0]) == [-1, 0]


@settings(max_examples=40, deadline=None)
@given(rational_matrices())
def test_rank_nullity_and_idempotence(m):
    red, r = rref(m)
    assert rref(red) == (red, r)
    assert kernel(m).dim + r == len(m[0])
    # kernel vectors really are annihilated
    for v in kernel(m).basis:
        assert all(sum(a * b for a, b in zip(row, v)) == 0 for row in m)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
def test_skew_normal_form_reconstruction(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2 * n, 2 * n))
    omega = a - a.T
    p, lam = skew_normal_form(omega)
    assert np.abs(p @ block_form(lam) @ p.T - omega).max() < 1e-9
    assert list(lam) == sorted(lam, reverse=True) and lam[-1] > 0


def test_rank_helper():
    assert rank([[1, 2], [2, 4]]) == 1
