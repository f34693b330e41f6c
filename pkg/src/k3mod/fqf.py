"""Finite quadratic forms (D, q) with values in Q/2Z.

A form is presented by generator orders and a symmetric rational matrix F
whose diagonal is read mod 2 and whose off-diagonal entries are read mod 1.
Elements of D are integer row vectors reduced mod the generator orders, and
automorphisms act on row vectors from the right (x -> x T).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .exact import (
    DomainError,
    det,
    inverse,
    legendre,
    mod_p_int,
    ord_p,
    prime_factors,
    smallest_nonresidue,
    unit_part,
)

DEFAULT_BOUND = 10**5


class CapacityError(RuntimeError):
    """A search would exceed the configured feasibility bound."""


def _red2(x: Fraction) -> Fraction:
    return x - 2 * (x.numerator // (2 * x.denominator))


def _red1(x: Fraction) -> Fraction:
    return x - (x.numerator // x.denominator)


def _prime_of(n: int) -> int:
    ps = prime_factors(n)
    if len(ps) != 1:
        raise DomainError(f"generator order {n} is not a prime power")
    return ps[0]


@dataclass(frozen=True)
class FQF:
    """A nondegenerate finite quadratic form given by orders and F_q."""

    orders: Tuple[int, ...]
    F: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self):
        n = len(self.orders)
        F = [[Fraction(x) for x in r] for r in self.F]
        if len(F) != n or any(len(r) != n for r in F):
            raise DomainError("F_q has the wrong shape")
        for i in range(n):
            for j in range(n):
                if F[i][j] != F[j][i]:
                    raise DomainError("F_q is not symmetric")
        red = tuple(
            tuple(_red2(F[i][j]) if i == j else _red1(F[i][j]) for j in range(n))
            for i in range(n)
        )
        object.__setattr__(self, "F", red)
        object.__setattr__(self, "orders", tuple(int(o) for o in self.orders))
        for i, o in enumerate(self.orders):
            if o < 2:
                raise DomainError("generator orders must be > 1")
            _prime_of(o)
            if (o * o * red[i][i]) % 2 != 0 or any((o * red[i][j]).denominator != 1 for j in range(n)):
                raise DomainError(f"F_q is not well defined on generator {i}")

    # -- basic structure -------------------------------------------------

    @staticmethod
    def make(orders: Sequence[int], F) -> "FQF":
        return FQF(tuple(orders), tuple(tuple(Fraction(x) for x in r) for r in F))

    @staticmethod
    def trivial() -> "FQF":
        return FQF((), ())

    @property
    def length(self) -> int:
        return len(self.orders)

    @property
    def size(self) -> int:
        n = 1
        for o in self.orders:
            n *= o
        return n

    @property
    def primes(self) -> List[int]:
        return sorted({_prime_of(o) for o in self.orders})

    @cached_property
    def _int(self) -> Tuple[int, Tuple[Tuple[int, ...], ...]]:
        from math import lcm

        N = 1
        for r in self.F:
            for x in r:
                N = lcm(N, x.denominator)
        return N, tuple(tuple(int(x * N) for x in r) for r in self.F)

    def q_int(self, x: Sequence[int]) -> int:
        """N q(x) mod 2N where N is the common denominator of F."""
        N, A = self._int
        s = 0
        n = len(x)
        for i in range(n):
            xi = x[i]
            if xi:
                Ai = A[i]
                s += xi * xi * Ai[i]
                t = 0
                for j in range(i + 1, n):
                    if x[j]:
                        t += x[j] * Ai[j]
                s += 2 * xi * t
        return s % (2 * N)

    def b_int(self, x: Sequence[int], y: Sequence[int]) -> int:
        """N b(x, y) mod N."""
        N, A = self._int
        s = 0
        for i, xi in enumerate(x):
            if xi:
                Ai = A[i]
                for j, yj in enumerate(y):
                    if yj:
                        s += xi * yj * Ai[j]
        return s % N

    def q(self, x: Sequence[int]) -> Fraction:
        return Fraction(self.q_int(x), self._int[0])

    def b(self, x: Sequence[int], y: Sequence[int]) -> Fraction:
        return Fraction(self.b_int(x, y), self._int[0])

    def reduce(self, x: Sequence[int]) -> Tuple[int, ...]:
        return tuple(int(a) % o for a, o in zip(x, self.orders))

    def elements(self) -> Iterator[Tuple[int, ...]]:
        return itertools.product(*[range(o) for o in self.orders])

    def order_of(self, x: Sequence[int]) -> int:
        from math import gcd

        n = 1
        for a, o in zip(x, self.orders):
            k = o // gcd(int(a) % o, o) if a % o else 1
            n = n * k // gcd(n, k)
        return n

    def is_nondegenerate(self) -> bool:
        if not self.orders:
            return True
        if self.size > DEFAULT_BOUND:
            return det(self.F) != 0
        gens = [tuple(int(i == j) for j in range(self.length)) for i in range(self.length)]
        for x in self.elements():
            if any(x) and all(self.b(x, g) == 0 for g in gens):
                return False
        return True

    def p_part(self, p: int) -> "FQF":
        idx = [i for i, o in enumerate(self.orders) if o % p == 0]
        return self.sub(idx)

    def p_indices(self, p: int) -> List[int]:
        return [i for i, o in enumerate(self.orders) if o % p == 0]

    def sub(self, idx: Sequence[int]) -> "FQF":
        return FQF(
            tuple(self.orders[i] for i in idx),
            tuple(tuple(self.F[i][j] for j in idx) for i in idx),
        )

    def negate(self) -> "FQF":
        return FQF(self.orders, tuple(tuple(-x for x in r) for r in self.F))

    def direct_sum(self, other: "FQF") -> "FQF":
        n, m = self.length, other.length
        F = [[Fraction(0)] * (n + m) for _ in range(n + m)]
        for i in range(n):
            for j in range(n):
                F[i][j] = self.F[i][j]
        for i in range(m):
            for j in range(m):
                F[n + i][n + j] = other.F[i][j]
        return FQF(self.orders + other.orders, tuple(map(tuple, F)))

    def with_basis(self, rows: Sequence[Sequence[int]], orders: Sequence[int]) -> "FQF":
        """The form on new generators given as integer rows over the old ones."""
        n = len(rows)
        F = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            F[i][i] = self.q(rows[i])
            for j in range(i + 1, n):
                F[i][j] = F[j][i] = self.b(rows[i], rows[j])
        return FQF(tuple(orders), tuple(map(tuple, F)))

    def is_automorphism(self, T: Sequence[Sequence[int]]) -> bool:
        """T F T^t == F mod Delta(Z) and T induces a bijection of D."""
        n = self.length
        for i in range(n):
            if self.order_of(T[i]) != self.orders[i] and self.orders[i] % self.order_of(T[i]):
                return False
            if self.q(T[i]) != self.F[i][i]:
                return False
            for j in range(i + 1, n):
                if self.b(T[i], T[j]) != self.F[i][j]:
                    return False
        return _generates(self, [self.reduce(r) for r in T])

    def apply(self, x: Sequence[int], T: Sequence[Sequence[int]]) -> Tuple[int, ...]:
        n = self.length
        return tuple(
            sum(x[i] * T[i][j] for i in range(n)) % self.orders[j] for j in range(n)
        )

    def compose(self, A, B) -> List[List[int]]:
        """Matrix of 'first A then B' (row-vector convention: A B)."""
        return [list(self.apply(row, B)) for row in A]


def _generates(q: FQF, rows: Sequence[Sequence[int]]) -> bool:
    """Do the given elements generate D?  Checked prime by prime mod p."""
    for p in q.primes:
        idx = q.p_indices(p)
        # images of the p-part generators must span D/pD
        mat = []
        for i in idx:
            mat.append([rows[i][j] % p for j in idx])
        from .exact import fp_rank

        if fp_rank(mat, p) != len(idx):
            return False
        # and have no component outside the p-part
        for i in idx:
            for j in range(q.length):
                if j not in idx and rows[i][j] % q.orders[j]:
                    return False
    return True


# ---------------------------------------------------------------------------
# indecomposable blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Block:
    """One indecomposable p-adic block.

    kind is 'w' (cyclic, unit ``eps``), 'u' or 'v' (rank two, p = 2 only).
    For p odd, eps is +1 or -1 (residue or nonresidue class).
    """

    p: int
    nu: int
    kind: str
    eps: int = 1

    @property
    def rank(self) -> int:
        return 1 if self.kind == "w" else 2

    def orders(self) -> Tuple[int, ...]:
        return (self.p**self.nu,) * self.rank

    def gram(self) -> List[List[Fraction]]:
        s = Fraction(1, self.p**self.nu)
        if self.kind == "w":
            if self.p == 2:
                return [[self.eps * s]]
            n = 1 if self.eps == 1 else smallest_nonresidue(self.p)
            return [[2 * n * s]]
        if self.kind == "u":
            return [[Fraction(0), s], [s, Fraction(0)]]
        return [[2 * s, s], [s, 2 * s]]

    def brown(self) -> int:
        p, nu, e = self.p, self.nu, self.eps
        if self.kind == "u":
            return 0
        if self.kind == "v":
            return (4 * nu) % 8
        if p == 2:
            return (e + nu * (e * e - 1) // 2) % 8
        if nu % 2 == 0:
            return 0
        s = (-1) ** ((p - 1) // 2)
        return (1 - s) % 8 if e == 1 else (-3 - s) % 8

    def label(self) -> str:
        if self.kind == "w":
            return f"w[{self.p},{self.nu}]^{self.eps}"
        return f"{self.kind}_{self.nu}"


def blocks_form(blocks: Sequence[Block]) -> FQF:
    orders: List[int] = []
    grams = []
    for bl in blocks:
        orders.extend(bl.orders())
        grams.append(bl.gram())
    n = len(orders)
    F = [[Fraction(0)] * n for _ in range(n)]
    k = 0
    for g in grams:
        for i in range(len(g)):
            for j in range(len(g)):
                F[k + i][k + j] = g[i][j]
        k += len(g)
    return FQF(tuple(orders), tuple(map(tuple, F)))


# ---------------------------------------------------------------------------
# constructive Jordan splitting
# ---------------------------------------------------------------------------


def _val(x: Fraction, p: int):
    return ord_p(x, p)


def _sqrt_mod_prime_power(a: int, p: int, k: int) -> int:
    """A square root of a mod p^k (a a unit square; for p = 2 need a = 1 mod 8)."""
    m = p**k
    a %= m
    if p == 2:
        if k <= 3:
            return 1
        x = 1
        for j in range(3, k):
            if (x * x - a) % (2 ** (j + 1)):
                x += 2 ** (j - 1)
        return x % m
    x = next(c for c in range(1, p) if (c * c - a) % p == 0)
    for j in range(1, k):
        mod = p ** (j + 1)
        t = ((x * x - a) % mod // p**j) * pow(2 * x, -1, p) % p
        x = (x - t * p**j) % mod
    return x % m


def _int_coef(c: Fraction, m: int) -> int:
    """A p-integral rational read as an integer mod m."""
    return mod_p_int(c, m)


def jordan_split(q: FQF) -> Tuple[List[List[int]], List[Block]]:
    """Split a p-primary form into Table-2 blocks.

    Returns integer rows H (new generators in terms of the old ones) and the
    blocks, so that ``q.with_basis(H, orders)`` equals ``blocks_form(blocks)``.
    """
    if not q.orders:
        return [], []
    ps = q.primes
    if len(ps) != 1:
        raise DomainError("jordan_split needs a p-primary form")
    p = ps[0]
    n = q.length
    kmax = max(ord_p(o, p) for o in q.orders)
    N = kmax + 3
    mod = p**N
    rows = [[int(i == j) for j in range(n)] for i in range(n)]
    done: List[Tuple[List[List[int]], int, str]] = []  # (rows, scale, kind)
    active = list(range(n))

    def F_of(rs):
        return [
            [q.q(rs[i]) if i == j else q.b(rs[i], rs[j]) for j in range(len(rs))]
            for i in range(len(rs))
        ]

    cur = [rows[i] for i in active]
    while cur:
        F = F_of(cur)
        m = len(cur)
        best = None
        for i in range(m):
            for j in range(i, m):
                x = F[i][j] if i != j else _red1(F[i][i])
                v = _val(x, p)
                if best is None or v < best[0] or (v == best[0] and i == j and best[1] != best[2]):
                    best = (v, i, j)
        v, i, j = best
        if v >= 0:
            raise DomainError("degenerate form")
        k = -v
        if i == j or p != 2:
            if i != j:
                # p odd: make a diagonal pivot out of an off-diagonal one
                cand = [a + b for a, b in zip(cur[i], cur[j])]
                if _val(_red1(q.q(cand)), p) == v:
                    cur[i] = cand
                else:
                    cur[i] = [a - b for a, b in zip(cur[i], cur[j])]
                F = F_of(cur)
            piv = cur[i]
            a = F[i][i]
            rest = []
            for t in range(m):
                if t == i:
                    continue
                c = _int_coef(F[t][i] / a, mod)
                rest.append([(x - c * y) for x, y in zip(cur[t], piv)])
            done.append(([piv], k, "w"))
            cur = rest
        else:
            # p = 2 and an even 2x2 block
            x, y = cur[i], cur[j]
            B = [[F[i][i], F[i][j]], [F[j][i], F[j][j]]]
            Binv = inverse(B)
            rest = []
            for t in range(m):
                if t in (i, j):
                    continue
                c1 = F[t][i] * Binv[0][0] + F[t][j] * Binv[1][0]
                c2 = F[t][i] * Binv[0][1] + F[t][j] * Binv[1][1]
                c1i, c2i = _int_coef(c1, mod), _int_coef(c2, mod)
                rest.append([a - c1i * b - c2i * c for a, b, c in zip(cur[t], x, y)])
            done.append(([x, y], k, "2"))
            cur = rest
        cur = [[c % mod for c in r] for r in cur]

    H: List[List[int]] = []
    blocks: List[Block] = []
    for rs, k, kind in done:
        if kind == "w":
            r, bl = _normalize_cyclic(q, rs[0], p, k)
            H.append(r)
            blocks.append(bl)
        else:
            r2, bl = _normalize_even_plane(q, rs, k)
            H.extend(r2)
            blocks.append(bl)
    H = [list(q.reduce(r)) for r in H]
    # sanity: exact agreement with the block form
    target = blocks_form(blocks)
    got = q.with_basis(H, target.orders)
    if got != target or any(q.order_of(h) != o for h, o in zip(H, target.orders)):
        raise AssertionError("Jordan splitting failed to reach normal form")
    return H, blocks


def _normalize_cyclic(q: FQF, row: List[int], p: int, k: int) -> Tuple[List[int], Block]:
    val = q.q(row)
    pk = p**k
    a = val * pk  # a unit of Z_(p) read mod 2 p^k
    if p == 2:
        u = mod_p_int(a, 2 ** (k + 3))
        if k == 1:
            return list(row), Block(2, 1, "w", u % 4)
        eps = u % 8
        ratio = eps * pow(u, -1, 2 ** (k + 1)) % 2 ** (k + 1)
        s = _sqrt_mod_prime_power(ratio, 2, k + 1)
        return [x * s for x in row], Block(2, k, "w", eps)
    num = mod_p_int(a, pk)
    half = num * pow(2, -1, pk) % pk
    chi = legendre(half, p)
    t = 1 if chi == 1 else smallest_nonresidue(p)
    ratio = t * pow(half, -1, pk) % pk
    s = _sqrt_mod_prime_power(ratio, p, k)
    return [x * s for x in row], Block(p, k, "w", chi)


def _normalize_even_plane(q: FQF, rs: List[List[int]], k: int) -> Tuple[List[List[int]], Block]:
    """Bring an even rank-2 block of scale 2^k to u_k or v_k by a small search."""
    x, y = rs
    m = 2**k
    s = Fraction(1, m)
    sub = q.with_basis([x, y], (m, m))
    want_u = (Fraction(0), s, Fraction(0))
    want_v = (_red2(2 * s), s, _red2(2 * s))
    cands = []
    for a, b in itertools.product(range(m), repeat=2):
        if a % 2 == 0 and b % 2 == 0:
            continue
        cands.append((a, b))
    for kind, want in (("u", want_u), ("v", want_v)):
        for a, b in cands:
            e = (a, b)
            if sub.q(e) != want[0]:
                continue
            for c, d in cands:
                f = (c, d)
                if (a * d - b * c) % 2 == 0:
                    continue
                if sub.b(e, f) == want[1] and sub.q(f) == want[2]:
                    r1 = [a * xi + b * yi for xi, yi in zip(x, y)]
                    r2 = [c * xi + d * yi for xi, yi in zip(x, y)]
                    return [r1, r2], Block(2, k, kind)
    raise AssertionError("even plane is neither u nor v")


# ---------------------------------------------------------------------------
# invariants and canonical forms
# ---------------------------------------------------------------------------


def brown_invariant(q: FQF) -> int:
    """The Brown invariant in Z/8, summed over Table-2 blocks of every p-part."""
    total = 0
    for p in q.primes:
        _, blocks = jordan_split(q.p_part(p))
        total += sum(bl.brown() for bl in blocks)
    return total % 8


def _odd_key(blocks: Sequence[Block]) -> Tuple:
    by: Dict[int, List[int]] = {}
    for bl in blocks:
        by.setdefault(bl.nu, []).append(bl.eps)
    out = []
    for nu in sorted(by):
        chi = 1
        for e in by[nu]:
            chi *= e
        out.append((nu, len(by[nu]), chi))
    return tuple(out)


def _two_adic_symbol(blocks: Sequence[Block], extra: Optional[str]) -> List[List[int]]:
    """Conway-Sloane style symbol [scale, rank, det mod 8, type, oddity] of the
    companion lattice (Gram F^{-1}) plus an optional unimodular plane."""
    comp: Dict[int, List[int]] = {}
    for bl in blocks:
        c = comp.setdefault(bl.nu, [0, 1, 0, 0])  # rank, det, type, oddity
        if bl.kind == "w":
            c[0] += 1
            c[1] = c[1] * bl.eps % 8
            c[2] = 1
            c[3] = (c[3] + bl.eps) % 8
        elif bl.kind == "u":
            c[0] += 2
            c[1] = c[1] * 7 % 8
        else:
            c[0] += 2
            c[1] = c[1] * 3 % 8
    if extra is not None:
        comp[0] = [2, 7 if extra == "u" else 3, 0, 0]
    return [[s] + comp[s] for s in sorted(comp)]


def _canonical_2adic(symbol: List[List[int]]) -> Tuple:
    sym = [list(s) for s in symbol]
    for s in sym:
        s[2] = 1 if s[2] in (1, 7) else -1
    # compartments: maximal runs of consecutive odd components
    comps: List[List[int]] = []
    i = 0
    while i < len(sym):
        if sym[i][3] == 1:
            c = [i]
            while i + 1 < len(sym) and sym[i + 1][3] == 1 and sym[i + 1][0] == sym[i][0] + 1:
                i += 1
                c.append(i)
            comps.append(c)
        i += 1
    for c in comps:
        o = sum(sym[j][4] for j in c) % 8
        for j in c:
            sym[j][4] = 0
        sym[c[0]][4] = o
    # trains
    trains: List[List[int]] = []
    if sym:
        cur = [0]
        for j in range(1, len(sym)):
            prev, now = sym[j - 1], sym[j]
            gap = now[0] - prev[0]
            linked = (gap == 1 and (prev[3] or now[3])) or (gap == 2 and prev[3] and now[3])
            if linked:
                cur.append(j)
            else:
                trains.append(cur)
                cur = [j]
        trains.append(cur)
    for tr in trains:
        for j in reversed(tr[1:]):
            if sym[j][2] == -1:
                sym[j][2] = 1
                sym[j - 1][2] *= -1
                for c in comps:
                    if j - 1 in c or j in c:
                        sym[c[0]][4] = (sym[c[0]][4] + 4) % 8
    return tuple(tuple(s) for s in sym)


def _two_key(blocks: Sequence[Block]) -> Tuple:
    a = _canonical_2adic(_two_adic_symbol(blocks, "u"))
    b = _canonical_2adic(_two_adic_symbol(blocks, "v"))
    return min(a, b)


def fqf_key(q: FQF) -> Tuple:
    """A complete isomorphism invariant, computed p-part by p-part."""
    out = []
    for p in q.primes:
        _, blocks = jordan_split(q.p_part(p))
        out.append((p, _odd_key(blocks) if p != 2 else _two_key(blocks)))
    return tuple(out)


def fqf_isomorphic(q1: FQF, q2: FQF) -> bool:
    if sorted(q1.orders) != sorted(q2.orders):
        return False
    return fqf_key(q1) == fqf_key(q2)


@dataclass(frozen=True)
class NormalFormTag:
    blocks: Tuple[Block, ...]

    def labels(self) -> List[str]:
        return [b.label() for b in self.blocks]

    def form(self) -> FQF:
        return blocks_form(self.blocks)


def _sort_blocks(blocks: Sequence[Block]) -> Tuple[Block, ...]:
    order = {"w": 0, "u": 1, "v": 2}
    return tuple(sorted(blocks, key=lambda b: (b.p, b.nu, order[b.kind], b.eps % 8)))


def _odd_component_options(nu: int, n: int) -> List[Tuple[Block, ...]]:
    """For each reachable (det sign, oddity), the smallest diagonal realisation."""
    seen: Dict[Tuple[int, int], Tuple[Block, ...]] = {}
    units = (1, 3, 5, 7) if nu > 1 else (1, 3)
    for combo in itertools.combinations_with_replacement(units, n):
        d = 1
        for e in combo:
            d = d * e % 8
        key = (1 if d in (1, 7) else -1, sum(combo) % 8)
        if key not in seen:
            seen[key] = tuple(Block(2, nu, "w", e) for e in combo)
    return list(seen.values())


def normal_form(q: FQF) -> NormalFormTag:
    """Canonical Table-2 decomposition of a p-primary form."""
    if not q.orders:
        return NormalFormTag(())
    ps = q.primes
    if len(ps) != 1:
        raise DomainError("normal_form needs a p-primary form")
    if not q.is_nondegenerate():
        raise DomainError("normal_form needs a nondegenerate form")
    p = ps[0]
    _, blocks = jordan_split(q)
    if p != 2:
        out = []
        for nu, n, chi in _odd_key(blocks):
            out += [Block(p, nu, "w", 1)] * (n - 1) + [Block(p, nu, "w", chi)]
        return NormalFormTag(_sort_blocks(out))
    target = _two_key(blocks)
    scales: Dict[int, Tuple[int, bool]] = {}
    for bl in blocks:
        n, odd = scales.get(bl.nu, (0, False))
        scales[bl.nu] = (n + bl.rank, odd or bl.kind == "w")
    per_scale = []
    for nu in sorted(scales):
        n, odd = scales[nu]
        if odd:
            opts = _odd_component_options(nu, n)
        else:
            h = n // 2
            opts = [(Block(2, nu, "u"),) * h, (Block(2, nu, "u"),) * (h - 1) + (Block(2, nu, "v"),)]
        per_scale.append(opts)
    best = None
    for choice in itertools.product(*per_scale):
        cand = [b for part in choice for b in part]
        if _two_key(cand) == target:
            tag = _sort_blocks(cand)
            key = [(b.nu, {"w": 0, "u": 1, "v": 2}[b.kind], b.eps) for b in tag]
            if best is None or key < best[0]:
                best = (key, tag)
    if best is None:
        raise AssertionError("no canonical representative found")
    return NormalFormTag(best[1])


# ---------------------------------------------------------------------------
# automorphisms, isomorphisms, isotropic subgroups
# ---------------------------------------------------------------------------


class _Search:
    """Backtracking over images of the generators of a source form."""

    def __init__(self, src: FQF, dst: FQF, bound: int):
        self.src, self.dst, self.bound = src, dst, bound
        self.visited = 0
        n = src.length
        self.by_class: Dict[Tuple[int, Fraction], List[Tuple[int, ...]]] = {}
        if dst.size > bound:
            raise CapacityError(f"|D| = {dst.size} exceeds the bound {bound}")
        for y in dst.elements():
            self.by_class.setdefault((dst.order_of(y), dst.q(y)), []).append(y)
        self.need = [(src.orders[i], src.F[i][i]) for i in range(n)]
        N = dst._int[0]
        self.want = [[int(_red1(src.F[j][i]) * N) if (_red1(src.F[j][i]) * N).denominator == 1 else None
                      for j in range(n)] for i in range(n)]

    def candidates(self, i: int, partial: Sequence[Tuple[int, ...]]) -> List[Tuple[int, ...]]:
        out = []
        for y in self.by_class.get(self.need[i], []):
            self.visited += 1
            if self.visited > self.bound:
                raise CapacityError(f"automorphism search exceeded {self.bound} steps")
            w = self.want[i]
            if all(w[j] is not None and self.dst.b_int(partial[j], y) == w[j] for j in range(i)):
                out.append(y)
        return out

    def extend(self, partial: List[Tuple[int, ...]]) -> Optional[List[Tuple[int, ...]]]:
        i = len(partial)
        if i == self.src.length:
            return partial if _generates(self.dst, partial) and self.dst.size == self.src.size else None
        for y in self.candidates(i, partial):
            r = self.extend(partial + [y])
            if r is not None:
                return r
        return None


def find_isomorphism(q1: FQF, q2: FQF, bound: int = DEFAULT_BOUND) -> Optional[List[List[int]]]:
    """Rows are images in q2-coordinates of the generators of q1, or None."""
    if q1.size != q2.size:
        return None
    if q1.length == 0:
        return []
    s = _Search(q1, q2, bound)
    r = s.extend([])
    return None if r is None else [list(x) for x in r]


@dataclass
class AutomorphismGroup:
    form: FQF
    generators: List[List[List[int]]]
    order: int
    transversals: List[List[List[List[int]]]] = field(default_factory=list)

    def elements(self, bound: int = DEFAULT_BOUND) -> List[Tuple[Tuple[int, ...], ...]]:
        """All elements, by products of transversals (base images are distinct)."""
        if self.order > bound:
            raise CapacityError(f"|O(q)| = {self.order} exceeds the bound {bound}")
        n = self.form.length
        ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        elems = [ident]
        for tv in self.transversals:
            elems = [
                tuple(map(tuple, self.form.compose([list(r) for r in g], t)))
                for t in tv
                for g in elems
            ]
        return sorted(set(elems))


def fqf_automorphisms(q: FQF, bound: int = DEFAULT_BOUND) -> AutomorphismGroup:
    """Generators and order of O(D, q) by an orbit-stabiliser chain on the generators."""
    n = q.length
    ident = [[int(i == j) for j in range(n)] for i in range(n)]
    if n == 0:
        return AutomorphismGroup(q, [], 1, [])
    s = _Search(q, q, bound)
    order = 1
    gens: List[List[List[int]]] = []
    transversals: List[List[List[List[int]]]] = []
    for level in range(n):
        fixed = [tuple(ident[i]) for i in range(level)]
        tv = []
        for y in s.candidates(level, fixed):
            r = s.extend(fixed + [y])
            if r is not None:
                T = [list(x) for x in r]
                tv.append(T)
                if T != ident and T not in gens:
                    gens.append(T)
        order *= len(tv)
        # transversal for "first apply stabiliser element, then the coset rep"
        transversals.append(tv)
    # elements() composes in the order  g * t, building from the deepest level
    return AutomorphismGroup(q, gens, order, list(reversed(transversals)))


def group_closure(q: FQF, gens: Sequence[Sequence[Sequence[int]]], bound: int = DEFAULT_BOUND):
    n = q.length
    ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
    seen = {ident}
    frontier = [ident]
    gl = [[list(r) for r in g] for g in gens]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gl:
                y = tuple(map(tuple, q.compose([list(r) for r in x], g)))
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
                    if len(seen) > bound:
                        raise CapacityError(f"group closure exceeded {bound}")
        frontier = nxt
    return sorted(seen)


def subgroup_elements(q: FQF, gens: Sequence[Sequence[int]]) -> frozenset:
    out = {tuple([0] * q.length)}
    frontier = list(out)
    gl = [q.reduce(g) for g in gens]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gl:
                y = q.reduce([a + b for a, b in zip(x, g)])
                if y not in out:
                    out.add(y)
                    nxt.append(y)
        frontier = nxt
    return frozenset(out)


def abelian_invariants(q: FQF, elems: frozenset) -> Tuple[int, ...]:
    """Invariant factors (d1 | d2 | ...) of a finite subgroup given as a set."""
    from collections import Counter

    if len(elems) == 1:
        return ()
    # p-primary decomposition via element orders
    orders = Counter(q.order_of(x) for x in elems)
    primes = prime_factors(len(elems))
    parts: Dict[int, List[int]] = {}
    for p in primes:
        # number of elements killed by p^k gives the p-ranks
        cnt = {}
        k = 0
        while True:
            c = sum(v for o, v in orders.items() if (p**k) % _p_power(o, p) == 0)
            cnt[k] = c
            if c == _p_power(len(elems), p):
                break
            k += 1
        # |{x : p^k x = 0}| = p^{sum_i min(k, e_i)}
        exps = []
        logs = {kk: _log(cnt[kk], p) for kk in cnt}
        kmax = max(cnt)
        for kk in range(1, kmax + 1):
            r_k = logs[kk] - logs[kk - 1]  # number of cyclic factors with exponent >= kk
            exps.append(r_k)
        factors = []
        for kk in range(1, kmax + 1):
            nk = exps[kk - 1] - (exps[kk] if kk < kmax else 0)
            factors += [p**kk] * nk
        parts[p] = sorted(factors)
    # combine into invariant factors
    width = max(len(v) for v in parts.values())
    inv = [1] * width
    for p, fs in parts.items():
        fs = [1] * (width - len(fs)) + fs
        inv = [a * b for a, b in zip(inv, fs)]
    return tuple(x for x in inv if x > 1)


def _p_power(n: int, p: int) -> int:
    r = 1
    while n % p == 0:
        n //= p
        r *= p
    return r


def _log(n: int, p: int) -> int:
    k = 0
    while n > 1:
        n //= p
        k += 1
    return k


def normalize_abelian(spec: Sequence[int]) -> Tuple[int, ...]:
    """Invariant factors of Z/a1 x Z/a2 x ... (1's dropped)."""
    from math import gcd

    fs = [int(a) for a in spec if int(a) > 1]
    # Smith normal form of a diagonal matrix
    changed = True
    while changed:
        changed = False
        for i in range(len(fs)):
            for j in range(i + 1, len(fs)):
                a, b = fs[i], fs[j]
                g = gcd(a, b)
                l = a * b // g
                if (a, b) != (g, l):
                    fs[i], fs[j] = g, l
                    changed = True
    return tuple(x for x in fs if x > 1)


def isotropic_subgroups(
    q: FQF, shape: Optional[Sequence[int]] = None, bound: int = DEFAULT_BOUND
) -> List[frozenset]:
    """All totally isotropic subgroups (each once), optionally of a given shape.

    Works prime by prime and takes products.  Subgroups are frozensets of
    element tuples, sorted by (order, sorted elements).
    """
    if q.size > bound:
        raise CapacityError(f"|D| = {q.size} exceeds the bound {bound}")
    target = normalize_abelian(shape) if shape is not None else None
    tsize = None
    if target is not None:
        tsize = 1
        for a in target:
            tsize *= a
        if any(p not in q.primes for p in prime_factors(tsize)):
            return []
    per_prime = []
    for p in q.primes:
        idx = q.p_indices(p)
        sub = q.sub(idx)
        cap = _p_power(tsize, p) if tsize is not None else None
        subs = _isotropic_p(sub, cap, bound)
        if target is not None:
            want = tuple(_p_power(a, p) for a in target if _p_power(a, p) > 1)
            subs = [K for K in subs if abelian_invariants(sub, K) == want]
        per_prime.append((idx, subs))
    out = []
    n = q.length
    for combo in itertools.product(*[subs for _, subs in per_prime]):
        parts = []
        for (idx, _), K in zip(per_prime, combo):
            emb = []
            for x in K:
                v = [0] * n
                for i, a in zip(idx, x):
                    v[i] = a
                emb.append(v)
            parts.append(emb)
        elems = {tuple([0] * n)}
        for emb in parts:
            elems = {tuple(a + b for a, b in zip(e, v)) for e in elems for v in emb}
        out.append(frozenset(elems))
    if not q.orders:
        out = [frozenset({()})] if target in (None, ()) else []
    out.sort(key=lambda K: (len(K), sorted(K)))
    return out


def _isotropic_p(q: FQF, cap: Optional[int], bound: int) -> List[frozenset]:
    iso = [x for x in q.elements() if any(x) and q.q_int(x) == 0]
    zero = frozenset({tuple([0] * q.length)})
    found = {zero}
    frontier: List[Tuple[frozenset, List[Tuple[int, ...]]]] = [(zero, [])]
    while frontier:
        nxt = []
        for K, gens in frontier:
            if cap is not None and len(K) >= cap:
                continue
            for x in iso:
                if x in K or any(q.b_int(x, g) for g in gens):
                    continue
                K2 = _join(q, K, x)
                if cap is not None and cap % len(K2):
                    continue
                if K2 not in found:
                    found.add(K2)
                    nxt.append((K2, gens + [x]))
                    if len(found) > bound:
                        raise CapacityError(f"isotropic subgroup enumeration exceeded {bound}")
        frontier = nxt
    return list(found)


def _join(q: FQF, K: frozenset, x: Sequence[int]) -> frozenset:
    """The subgroup generated by a subgroup K and one more element."""
    out = set(K)
    step = tuple(x)
    cur = step
    while cur not in K:
        for k in K:
            out.add(q.reduce([a + b for a, b in zip(k, cur)]))
        cur = q.reduce([a + b for a, b in zip(cur, step)])
    return frozenset(out)
