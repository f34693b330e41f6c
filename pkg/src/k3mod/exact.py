"""Exact rational helpers, square classes, and linear algebra over F_p and F_2.

Everything here is pure and works on plain Python integers and
``fractions.Fraction``; there is no floating point anywhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

Matrix = List[List[Fraction]]
IntMatrix = List[List[int]]


class DomainError(ValueError):
    """Raised for mathematically invalid input (zero where a unit is needed...)."""


class NoSolution(ValueError):
    """An affine system over F_p is inconsistent."""


# ---------------------------------------------------------------------------
# scalars
# ---------------------------------------------------------------------------


def frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def ord_p(x, p: int) -> float | int:
    """p-adic valuation of a rational; ``inf`` for zero."""
    x = frac(x)
    if x == 0:
        return float("inf")
    n, d = x.numerator, x.denominator
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


def unit_part(x, p: int) -> Fraction:
    """x / p^ord_p(x)."""
    x = frac(x)
    v = ord_p(x, p)
    return x / Fraction(p) ** v


def mod_p_int(x, m: int) -> int:
    """Residue of a rational with denominator prime to m, as an integer in [0, m)."""
    x = frac(x)
    d = x.denominator
    if math.gcd(d, m) != 1:
        raise DomainError(f"{x} is not integral modulo {m}")
    return (x.numerator * pow(d, -1, m)) % m


def legendre(a: int, p: int) -> int:
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def smallest_nonresidue(p: int) -> int:
    """n_p: the smallest positive quadratic nonresidue mod an odd prime p."""
    for n in range(2, p):
        if legendre(n, p) == -1:
            return n
    raise DomainError(f"no nonresidue mod {p}")


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def prime_factors(n: int) -> List[int]:
    n = abs(n)
    out = []
    q = 2
    while q * q <= n:
        if n % q == 0:
            out.append(q)
            while n % q == 0:
                n //= q
        q += 1
    if n > 1:
        out.append(n)
    return out


# ---------------------------------------------------------------------------
# square classes of Q_p^x and the groups Gamma_p
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class SquareClass:
    """An element of Q_p^x / (Q_p^x)^2.

    ``unit`` is a Legendre bit (0 residue, 1 nonresidue) when p is odd and a
    residue in {1, 3, 5, 7} when p = 2.
    """

    p: int
    val: int
    unit: int

    def bits(self) -> Tuple[int, ...]:
        if self.p == 2:
            u = self.unit
            return (self.val, 1 if u % 4 == 3 else 0, 1 if u in (5, 7) else 0)
        return (self.val, self.unit)

    @staticmethod
    def from_bits(p: int, bits: Sequence[int]) -> "SquareClass":
        if p == 2:
            a, b = bits[1], bits[2]
            unit = {(0, 0): 1, (1, 0): 3, (0, 1): 5, (1, 1): 7}[(a, b)]
            return SquareClass(2, bits[0], unit)
        return SquareClass(p, bits[0], bits[1])

    def __mul__(self, other: "SquareClass") -> "SquareClass":
        if self.p != other.p:
            raise DomainError("square classes at different primes")
        return SquareClass.from_bits(
            self.p, [(a + b) % 2 for a, b in zip(self.bits(), other.bits())]
        )

    def is_trivial(self) -> bool:
        return not any(self.bits())

    def render(self) -> str:
        if self.p == 2:
            return f"{2 if self.val else 1}*{self.unit}" if self.val else str(self.unit)
        u = "n" if self.unit else "1"
        return f"{self.p}*{u}" if self.val else u


def square_class(p: int, x) -> SquareClass:
    """The class of a nonzero rational in Q_p^x / (Q_p^x)^2."""
    x = frac(x)
    if x == 0:
        raise DomainError("square class of zero")
    v = ord_p(x, p)
    u = unit_part(x, p)
    if p == 2:
        return SquareClass(2, v % 2, mod_p_int(u, 8))
    return SquareClass(p, v % 2, 0 if legendre(mod_p_int(u, p), p) == 1 else 1)


def gamma_rank(p: int) -> int:
    return 4 if p == 2 else 3


@dataclass(frozen=True, order=True)
class GammaElement:
    """(det, spin) in Gamma_p = {+-1} x Q_p^x/(Q_p^x)^2."""

    det: int
    spin: SquareClass

    @property
    def p(self) -> int:
        return self.spin.p

    def bits(self) -> Tuple[int, ...]:
        return (0 if self.det == 1 else 1,) + self.spin.bits()

    @staticmethod
    def from_bits(p: int, bits: Sequence[int]) -> "GammaElement":
        return GammaElement(-1 if bits[0] else 1, SquareClass.from_bits(p, bits[1:]))

    @staticmethod
    def identity(p: int) -> "GammaElement":
        return GammaElement(1, square_class(p, 1))

    def __mul__(self, other: "GammaElement") -> "GammaElement":
        return GammaElement(self.det * other.det, self.spin * other.spin)

    def in_gamma0(self) -> bool:
        return self.spin.val == 0

    def render(self) -> str:
        return f"det={self.det:+d} spin={self.spin.render()}"


def gamma0_basis(p: int) -> List[GammaElement]:
    """Generators of the even-valuation subgroup Gamma_{p,0}."""
    units = [3, 5] if p == 2 else [smallest_nonresidue(p)]
    out = [GammaElement(-1, square_class(p, 1))]
    out += [GammaElement(1, square_class(p, u)) for u in units]
    return out


# ---------------------------------------------------------------------------
# F_p and F_2 linear algebra
# ---------------------------------------------------------------------------


def _rref_mod(rows: List[List[int]], p: int, ncols: int) -> Tuple[List[List[int]], List[int]]:
    rows = [[x % p for x in r] for r in rows]
    pivots: List[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = pow(rows[r][c], -1, p)
        rows[r] = [(x * inv) % p for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [(a - f * b) % p for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def fp_solve_affine(A: Sequence[Sequence[int]], b: Sequence[int], p: int) -> List[int]:
    """One solution of A x = b over F_p; free variables are set to zero."""
    n = len(A[0]) if A else 0
    if len(A) != len(b):
        raise DomainError("shape mismatch")
    aug = [list(row) + [bi] for row, bi in zip(A, b)]
    red, piv = _rref_mod(aug, p, n + 1)
    if piv and piv[-1] == n:
        raise NoSolution("inconsistent system")
    x = [0] * n
    for row, c in zip(red, piv):
        x[c] = row[n] % p
    return x


def fp_kernel(A: Sequence[Sequence[int]], p: int, n: Optional[int] = None) -> List[List[int]]:
    """A basis of {x : A x = 0} over F_p."""
    if n is None:
        n = len(A[0]) if A else 0
    red, piv = _rref_mod([list(r) for r in A], p, n)
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        v = [0] * n
        v[f] = 1
        for row, c in zip(red, piv):
            v[c] = (-row[f]) % p
        basis.append(v)
    return basis


def fp_rank(A: Sequence[Sequence[int]], p: int) -> int:
    if not A:
        return 0
    return len(_rref_mod([list(r) for r in A], p, len(A[0]))[1])


class F2Subspace:
    """A subspace of F_2^n kept as a reduced echelon basis of bitmask rows."""

    def __init__(self, n: int, vectors: Iterable[Sequence[int]] = ()):
        self.n = n
        self._rows: dict[int, int] = {}  # pivot bit -> row
        for v in vectors:
            self.add(v)

    @staticmethod
    def _mask(v: Sequence[int]) -> int:
        m = 0
        for i, x in enumerate(v):
            if x % 2:
                m |= 1 << i
        return m

    def _reduce(self, m: int) -> int:
        for piv in sorted(self._rows, reverse=True):
            if m >> piv & 1:
                m ^= self._rows[piv]
        return m

    def add(self, v: Sequence[int]) -> bool:
        if len(v) != self.n:
            raise DomainError(f"dimension mismatch: {len(v)} != {self.n}")
        m = self._reduce(self._mask(v))
        if not m:
            return False
        piv = m.bit_length() - 1
        for k in list(self._rows):
            if self._rows[k] >> piv & 1:
                self._rows[k] ^= m
        self._rows[piv] = m
        return True

    def contains(self, v: Sequence[int]) -> bool:
        if len(v) != self.n:
            raise DomainError(f"dimension mismatch: {len(v)} != {self.n}")
        return self._reduce(self._mask(v)) == 0

    @property
    def dim(self) -> int:
        return len(self._rows)

    def quotient_dim(self) -> int:
        return self.n - self.dim

    def basis(self) -> List[Tuple[int, ...]]:
        return [
            tuple((self._rows[k] >> i) & 1 for i in range(self.n))
            for k in sorted(self._rows, reverse=True)
        ]


def f2_span(vectors: Iterable[Sequence[int]], n: int) -> F2Subspace:
    return F2Subspace(n, vectors)


def f2_member(v: Sequence[int], space: F2Subspace) -> int:
    return 1 if space.contains(v) else 0


def f2_quotient_dim(vectors: Iterable[Sequence[int]], n: int) -> int:
    return F2Subspace(n, vectors).quotient_dim()


# ---------------------------------------------------------------------------
# rational matrices
# ---------------------------------------------------------------------------


def qmat(rows) -> Matrix:
    return [[frac(x) for x in r] for r in rows]


def identity(n: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def zeros(n: int, m: Optional[int] = None) -> Matrix:
    return [[Fraction(0)] * (n if m is None else m) for _ in range(n)]


def transpose(A):
    return [list(r) for r in zip(*A)] if A else []


def matmul(A, B):
    if not A:
        return []
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(r, c)) for c in Bt] for r in A]


def matadd(A, B):
    return [[a + b for a, b in zip(r, s)] for r, s in zip(A, B)]


def matsub(A, B):
    return [[a - b for a, b in zip(r, s)] for r, s in zip(A, B)]


def scale(A, c):
    return [[c * a for a in r] for r in A]


def vecmat(v, A):
    return [sum(v[i] * A[i][j] for i in range(len(v))) for j in range(len(A[0]))] if A else []


def dot(u, G, v) -> Fraction:
    """u G v^t for row vectors u, v."""
    return sum(u[i] * G[i][j] * v[j] for i in range(len(u)) for j in range(len(v)) if u[i] and v[j])


def inverse(A) -> Matrix:
    """Exact inverse by Gauss-Jordan; raises DomainError if singular."""
    n = len(A)
    M = [[frac(x) for x in r] + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(A)]
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            raise DomainError("singular matrix")
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        M[c] = [x * inv for x in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return [r[n:] for r in M]


def det(A) -> Fraction:
    n = len(A)
    M = [[frac(x) for x in r] for r in A]
    d = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            d = -d
        d *= M[c][c]
        for i in range(c + 1, n):
            if M[i][c] != 0:
                f = M[i][c] / M[c][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return d


def minord(A, p: int) -> float | int:
    """Minimum p-adic valuation over the entries of a matrix or vector."""
    flat = [x for r in A for x in r] if A and isinstance(A[0], list) else list(A)
    return min((ord_p(x, p) for x in flat), default=float("inf"))


def signature(G) -> Tuple[int, int]:
    """(s_plus, s_minus) of a nondegenerate rational symmetric matrix, exactly."""
    n = len(G)
    M = [[frac(x) for x in r] for r in G]
    pos = neg = 0
    # symmetric Gaussian elimination with pivoting on 2x2 blocks when needed
    idx = list(range(n))
    while idx:
        k = next((i for i in idx if M[i][i] != 0), None)
        if k is not None:
            a = M[k][k]
            pos += a > 0
            neg += a < 0
            rest = [i for i in idx if i != k]
            for i in rest:
                f = M[i][k] / a
                if f:
                    for j in rest:
                        M[i][j] -= f * M[k][j]
            idx = rest
            continue
        k = idx[0]
        j = next((i for i in idx if i != k and M[k][i] != 0), None)
        if j is None:
            raise DomainError("degenerate form")
        # replace e_k by e_k + e_j, which has nonzero norm 2 M[k][j]
        for i in range(n):
            M[k][i] += M[j][i]
        for i in range(n):
            M[i][k] += M[i][j]
    return pos, neg


# ---------------------------------------------------------------------------
# integer normal forms
# ---------------------------------------------------------------------------


def smith_normal_form(A: Sequence[Sequence[int]]) -> Tuple[IntMatrix, List[int], IntMatrix]:
    """U, diag, V with U A V = diag(d_1, ..., d_n), U and V unimodular.

    Square nonsingular input only; the d_i are positive and d_i | d_{i+1}.
    """
    n = len(A)
    M = [[int(x) for x in r] for r in A]
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(X, i, j):
        X[i], X[j] = X[j], X[i]

    def swap_cols(X, i, j):
        for r in X:
            r[i], r[j] = r[j], r[i]

    for t in range(n):
        while True:
            piv = None
            for i in range(t, n):
                for j in range(t, n):
                    if M[i][j] and (piv is None or abs(M[i][j]) < abs(M[piv[0]][piv[1]])):
                        piv = (i, j)
            if piv is None:
                raise DomainError("singular matrix in Smith normal form")
            i, j = piv
            swap_rows(M, t, i)
            swap_rows(U, t, i)
            swap_cols(M, t, j)
            swap_cols(V, t, j)
            done = True
            for i in range(t + 1, n):
                c = M[i][t] // M[t][t]
                if c:
                    M[i] = [a - c * b for a, b in zip(M[i], M[t])]
                    U[i] = [a - c * b for a, b in zip(U[i], U[t])]
                if M[i][t]:
                    done = False
            for j in range(t + 1, n):
                c = M[t][j] // M[t][t]
                if c:
                    for r in M:
                        r[j] -= c * r[t]
                    for r in V:
                        r[j] -= c * r[t]
                if M[t][j]:
                    done = False
            if not done:
                continue
            bad = None
            for i in range(t + 1, n):
                for j in range(t + 1, n):
                    if M[i][j] % M[t][t]:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            M[t] = [a + b for a, b in zip(M[t], M[bad])]
            U[t] = [a + b for a, b in zip(U[t], U[bad])]
        if M[t][t] < 0:
            M[t] = [-a for a in M[t]]
            U[t] = [-a for a in U[t]]
    return U, [M[i][i] for i in range(n)], V


def hnf_rows(rows: Sequence[Sequence[int]]) -> IntMatrix:
    """Row Hermite normal form; returns the nonzero rows (a Z-basis of the row span)."""
    M = [[int(x) for x in r] for r in rows]
    if not M:
        return []
    m = len(M[0])
    out: IntMatrix = []
    r0 = 0
    for c in range(m):
        nz = [i for i in range(r0, len(M)) if M[i][c]]
        if not nz:
            continue
        while True:
            nz = [i for i in range(r0, len(M)) if M[i][c]]
            k = min(nz, key=lambda i: abs(M[i][c]))
            M[r0], M[k] = M[k], M[r0]
            others = [i for i in range(r0 + 1, len(M)) if M[i][c]]
            if not others:
                break
            for i in others:
                q = M[i][c] // M[r0][c]
                M[i] = [a - q * b for a, b in zip(M[i], M[r0])]
        if M[r0][c] < 0:
            M[r0] = [-a for a in M[r0]]
        for i in range(r0):
            q = M[i][c] // M[r0][c]
            if q:
                M[i] = [a - q * b for a, b in zip(M[i], M[r0])]
        r0 += 1
        if r0 == len(M):
            break
    return [r for r in M[:r0]]
