from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from k3mod.exact import (
    DomainError,
    F2Subspace,
    GammaElement,
    NoSolution,
    SquareClass,
    det,
    fp_kernel,
    fp_solve_affine,
    gamma0_basis,
    hnf_rows,
    inverse,
    matmul,
    minord,
    mod_p_int,
    ord_p,
    signature,
    smith_normal_form,
    square_class,
)

int_matrices = st.integers(1, 4).flatmap(
    lambda n: st.lists(st.lists(st.integers(-6, 6), min_size=n, max_size=n), min_size=n, max_size=n)
)


def test_ord_p_and_unit_reduction():
    assert ord_p(12, 2) == 2
    assert ord_p(Fraction(5, 9), 3) == -2
    assert mod_p_int(Fraction(1, 3), 8) == 3  # 3 * 3 = 9 = 1 mod 8
    with pytest.raises(DomainError):
        mod_p_int(Fraction(1, 2), 8)


@pytest.mark.parametrize(
    "p, x, expected",
    [
        (2, 7, (0, 7)),
        (2, -1, (0, 7)),
        (2, 12, (0, 3)),
        (2, Fraction(1, 2), (1, 1)),
        (3, 2, (0, 1)),
        (3, 3, (1, 0)),
        (5, 4, (0, 0)),
    ],
)
def test_square_class(p, x, expected):
    c = square_class(p, x)
    assert (c.val, c.unit) == expected


@given(st.integers(1, 500), st.integers(1, 500), st.sampled_from([2, 3, 5, 7]))
def test_square_class_is_multiplicative(a, b, p):
    assert square_class(p, a * b) == square_class(p, a) * square_class(p, b)
    assert square_class(p, a * a).is_trivial()


@pytest.mark.parametrize("p", [2, 3, 5])
def test_gamma_bits_round_trip(p):
    n = 4 if p == 2 else 3
    for bits in itertools.product((0, 1), repeat=n):
        g = GammaElement.from_bits(p, bits)
        assert g.bits() == bits
    assert all(g.in_gamma0() for g in gamma0_basis(p))


def test_gamma_render():
    g = GammaElement(-1, square_class(3, 3 * 2))
    assert g.render() == "det=-1 spin=3*n"
    assert GammaElement.identity(2).render() == "det=+1 spin=1"


@settings(max_examples=60)
@given(int_matrices)
def test_smith_normal_form_reconstructs(A):
    assume(det(A) != 0)
    U, d, V = smith_normal_form(A)
    n = len(A)
    D = [[d[i] if i == j and i < len(d) else 0 for j in range(n)] for i in range(n)]
    assert matmul(matmul(U, A), V) == D
    nz = [x for x in d if x]
    assert all(b % a == 0 for a, b in zip(nz, nz[1:]))
    assert abs(det(U)) == 1 and abs(det(V)) == 1
    prod = 1
    for x in d:
        prod *= x
    assert abs(prod) == abs(det(A))


@settings(max_examples=60)
@given(int_matrices)
def test_inverse_and_det(A):
    dA = det(A)
    if dA == 0:
        return
    Ai = inverse(A)
    n = len(A)
    assert matmul(A, Ai) == [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def test_hnf_spans_same_lattice():
    rows = [[2, 4, 4], [-6, 6, 12], [10, -4, -16]]
    H = hnf_rows(rows)
    # every original row is an integer combination of H, and H has full rank here
    Hi = inverse(H)
    for r in rows:
        c = matmul([r], Hi)[0]
        assert all(x.denominator == 1 for x in c)


def test_signature():
    assert signature([[0, 1], [1, -2]]) == (1, 1)
    assert signature([[-2, 1], [1, -2]]) == (0, 2)


@given(st.lists(st.lists(st.integers(0, 2), min_size=4, max_size=4), min_size=1, max_size=4),
       st.lists(st.integers(0, 2), min_size=4, max_size=4))
def test_fp_solve_matches_brute_force(A, x0):
    p = 3
    b = [sum(a * x for a, x in zip(r, x0)) % p for r in A]
    x = fp_solve_affine(A, b, p)
    assert [sum(a * y for a, y in zip(r, x)) % p for r in A] == b
    ker = fp_kernel(A, p, 4)
    brute = [v for v in itertools.product(range(p), repeat=4)
             if all(sum(a * y for a, y in zip(r, v)) % p == 0 for r in A)]
    assert len(brute) == p ** len(ker)


def test_fp_solve_inconsistent():
    with pytest.raises(NoSolution):
        fp_solve_affine([[1, 1], [1, 1]], [0, 1], 2)


@given(st.lists(st.lists(st.integers(0, 1), min_size=5, max_size=5), max_size=7))
def test_f2_subspace_dimension(vectors):
    V = F2Subspace(5, vectors)
    span = {tuple([0] * 5)}
    for v in vectors:
        span |= {tuple((a + b) % 2 for a, b in zip(s, v)) for s in span}
    assert 2**V.dim == len(span)
    assert all(V.contains(s) for s in span)


def test_minord():
    assert minord([[Fraction(1, 4), 2], [6, 0]], 2) == -2
    assert minord([3, 9], 3) == 1


def test_square_class_from_bits_odd():
    assert SquareClass.from_bits(3, (1, 1)).render() == "3*n"
