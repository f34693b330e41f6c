"""Even Z-lattices: ADE root lattices, discriminant groups, overlattices,
genus existence and the positive-definite binary toolkit."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import isqrt
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .exact import (
    DomainError,
    IntMatrix,
    Matrix,
    det,
    hnf_rows,
    inverse,
    matmul,
    signature,
    smith_normal_form,
    transpose,
)
from .fqf import FQF, brown_invariant, fqf_isomorphic, isotropic_subgroups


# ---------------------------------------------------------------------------
# integral lattices and discriminant groups
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegralLattice:
    gram: Tuple[Tuple[int, ...], ...]
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        g = tuple(tuple(int(x) for x in r) for r in self.gram)
        object.__setattr__(self, "gram", g)
        n = len(g)
        if any(len(r) != n for r in g):
            raise DomainError("Gram matrix is not square")
        for i in range(n):
            if g[i][i] % 2:
                raise DomainError("lattice is not even")
            for j in range(n):
                if g[i][j] != g[j][i]:
                    raise DomainError("Gram matrix is not symmetric")
        if n and det(g) == 0:
            raise DomainError("degenerate Gram matrix")

    @staticmethod
    def from_rows(rows) -> "IntegralLattice":
        return IntegralLattice(tuple(tuple(int(x) for x in r) for r in rows))

    @property
    def rank(self) -> int:
        return len(self.gram)

    @property
    def disc(self) -> int:
        return int(det(self.gram)) if self.rank else 1

    def signature(self) -> Tuple[int, int]:
        return signature(self.gram)

    def norm(self, v: Sequence) -> Fraction:
        G = self.gram
        n = len(v)
        return sum(
            (Fraction(v[i]) * v[j] * G[i][j] for i in range(n) for j in range(n) if v[i] and v[j]),
            Fraction(0),
        )


def read_gram_file(path: str) -> IntegralLattice:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([int(t) for t in line.split()])
    return IntegralLattice.from_rows(rows)


@dataclass
class Discriminant:
    """D_L = L^v / L with prime-power generators given as rational vectors."""

    gram: Tuple[Tuple[int, ...], ...]
    gens: List[List[Fraction]]
    form: FQF
    _cinv: Matrix = field(repr=False, default_factory=list)
    _cd: List[Tuple[int, int, int]] = field(repr=False, default_factory=list)

    def coords(self, w: Sequence) -> Tuple[int, ...]:
        """Coordinates in D of a dual vector w (given in lattice coordinates)."""
        z = [sum(Fraction(w[k]) * self._cinv[k][i] for k in range(len(w))) for i in range(len(w))]
        out = []
        for i, d, cofactor in self._cd:
            zi = z[i] * d
            if zi.denominator != 1:
                raise DomainError("vector is not in the dual lattice")
            o = self.form.orders[len(out)]
            out.append(int(zi) * pow(cofactor, -1, o) % o)
        return tuple(out)

    def lift(self, c: Sequence[int]) -> List[Fraction]:
        n = len(self.gram)
        v = [Fraction(0)] * n
        for a, g in zip(c, self.gens):
            if a:
                v = [x + a * y for x, y in zip(v, g)]
        return v

    def action(self, g: Sequence[Sequence[int]]) -> List[List[int]]:
        """Matrix on D of a lattice isometry x -> x g (rows of g: images of basis)."""
        out = []
        for v in self.gens:
            w = [sum(v[k] * g[k][j] for k in range(len(v))) for j in range(len(v))]
            out.append(list(self.coords(w)))
        return out


def discriminant(L: IntegralLattice) -> Discriminant:
    """Smith normal form based presentation of (D_L, q_L)."""
    n = L.rank
    if n == 0:
        return Discriminant((), [], FQF.trivial(), [], [])
    U, d, V = smith_normal_form(L.gram)
    # w in L^v  <=>  z = w U^{-1} has z_i d_i integral; generators U_i / d_i
    Uinv = inverse(U)
    gens: List[List[Fraction]] = []
    orders: List[int] = []
    cd: List[Tuple[int, int, int]] = []
    from .exact import prime_factors

    pieces: Dict[int, List[Tuple[int, int, int]]] = {}
    for i, di in enumerate(d):
        if di == 1:
            continue
        for p in prime_factors(di):
            pe = 1
            while di % (pe * p) == 0:
                pe *= p
            cof = di // pe
            pieces.setdefault(p, []).append((i, di, pe, cof))
    for p in sorted(pieces):
        for i, di, pe, cof in pieces[p]:
            gens.append([Fraction(cof * U[i][j], di) for j in range(n)])
            orders.append(pe)
            cd.append((i, di, cof))
    G = L.gram
    m = len(gens)
    F = [[Fraction(0)] * m for _ in range(m)]
    for a in range(m):
        for b in range(a, m):
            val = sum(gens[a][i] * G[i][j] * gens[b][j] for i in range(n) for j in range(n)
                      if gens[a][i] and gens[b][j])
            F[a][b] = F[b][a] = val
    form = FQF(tuple(orders), tuple(map(tuple, F)))
    return Discriminant(L.gram, gens, form, Uinv, cd)


def fqf_from_gram(L: IntegralLattice) -> FQF:
    return discriminant(L).form


# ---------------------------------------------------------------------------
# ADE configurations
# ---------------------------------------------------------------------------

_SYMBOL = re.compile(r"(\d*)\s*([ADE])\s*_?\{?\s*(\d+)\s*\}?")


def parse_ade(spec: str) -> List[Tuple[str, int]]:
    """'E8+A9+A1', 'E_{8}+2A_{5}' or '7A2' -> [('E', 8), ('A', 9), ...]."""
    spec = spec.strip()
    if spec in ("", "0", "empty"):
        return []
    out: List[Tuple[str, int]] = []
    for part in spec.replace(" ", "").split("+"):
        m = _SYMBOL.fullmatch(part)
        if not m:
            raise DomainError(f"malformed ADE symbol: {part!r}")
        mult = int(m.group(1) or 1)
        letter, n = m.group(2), int(m.group(3))
        if (letter == "A" and n < 1) or (letter == "D" and n < 4) or (letter == "E" and n not in (6, 7, 8)):
            raise DomainError(f"invalid ADE symbol: {part!r}")
        out += [(letter, n)] * mult
    return out


def _edges(letter: str, n: int) -> List[Tuple[int, int]]:
    if letter == "A":
        return [(i, i + 1) for i in range(n - 1)]
    if letter == "D":
        return [(i, i + 1) for i in range(n - 2)] + [(n - 3, n - 1)]
    e = [(0, 2), (1, 3)] + [(i, i + 1) for i in range(2, n - 1)]
    return e


def cartan_gram(letter: str, n: int) -> IntMatrix:
    """Negated Cartan matrix (roots of norm -2), Bourbaki numbering."""
    G = [[-2 if i == j else 0 for j in range(n)] for i in range(n)]
    for i, j in _edges(letter, n):
        G[i][j] = G[j][i] = 1
    return G


def highest_root_marks(letter: str, n: int) -> List[int]:
    if letter == "A":
        return [1] * n
    if letter == "D":
        return [1] + [2] * (n - 3) + [1, 1]
    return {6: [1, 2, 2, 3, 2, 1], 7: [2, 2, 3, 4, 3, 2, 1], 8: [2, 3, 4, 6, 5, 4, 3, 2]}[n]


def _diagram_auts(letter: str, n: int) -> Tuple[List[List[int]], int]:
    """Generators (as permutations of nodes) and order of the diagram group."""
    ident = list(range(n))
    if letter == "A":
        if n == 1:
            return [], 1
        return [list(reversed(ident))], 2
    if letter == "D":
        if n == 4:
            return [[2, 1, 0, 3], [0, 1, 3, 2]], 6
        p = ident[:]
        p[n - 2], p[n - 1] = p[n - 1], p[n - 2]
        return [p], 2
    if n == 6:
        return [[5, 1, 4, 3, 2, 0]], 2
    return [], 1


def _symbol_str(letter: str, n: int) -> str:
    return f"{letter}{n}"


@dataclass(frozen=True)
class AdeConfiguration:
    components: Tuple[Tuple[str, int], ...]

    @staticmethod
    def parse(spec: str) -> "AdeConfiguration":
        return AdeConfiguration(tuple(parse_ade(spec)))

    def __str__(self) -> str:
        from collections import Counter

        seen: List[Tuple[str, int]] = []
        cnt = Counter(self.components)
        for c in self.components:
            if c not in seen:
                seen.append(c)
        return "+".join((f"{cnt[c]}" if cnt[c] > 1 else "") + _symbol_str(*c) for c in seen)

    @property
    def offsets(self) -> List[int]:
        out, k = [], 0
        for _, n in self.components:
            out.append(k)
            k += n
        return out

    @property
    def rank(self) -> int:
        return sum(n for _, n in self.components)

    def lattice(self) -> IntegralLattice:
        n = self.rank
        G = [[0] * n for _ in range(n)]
        for (letter, m), off in zip(self.components, self.offsets):
            C = cartan_gram(letter, m)
            for i in range(m):
                for j in range(m):
                    G[off + i][off + j] = C[i][j]
        return IntegralLattice.from_rows(G)

    def marks(self) -> List[List[int]]:
        return [highest_root_marks(l, n) for l, n in self.components]

    def aut_generators(self) -> List[Tuple[int, ...]]:
        """Permutations of the simple roots generating the diagram group."""
        n = self.rank
        offs = self.offsets
        gens: List[Tuple[int, ...]] = []
        groups: Dict[Tuple[str, int], List[int]] = {}
        for idx, c in enumerate(self.components):
            groups.setdefault(c, []).append(idx)
        for c, idxs in groups.items():
            dg, _ = _diagram_auts(*c)
            first = offs[idxs[0]]
            for perm in dg:
                p = list(range(n))
                for i, j in enumerate(perm):
                    p[first + i] = first + j
                gens.append(tuple(p))
            m = c[1]
            if len(idxs) >= 2:
                a, b = offs[idxs[0]], offs[idxs[1]]
                p = list(range(n))
                for i in range(m):
                    p[a + i], p[b + i] = b + i, a + i
                gens.append(tuple(p))
            if len(idxs) >= 3:
                p = list(range(n))
                for t, idx in enumerate(idxs):
                    src = offs[idx]
                    dst = offs[idxs[(t + 1) % len(idxs)]]
                    for i in range(m):
                        p[src + i] = dst + i
                gens.append(tuple(p))
        return gens

    def aut_order(self) -> int:
        from collections import Counter
        from math import factorial

        out = 1
        for c, k in Counter(self.components).items():
            out *= factorial(k) * _diagram_auts(*c)[1] ** k
        return out

    def component_discriminants(self) -> List[Discriminant]:
        return [_component_disc(l, n) for l, n in self.components]

    def discriminant(self) -> Discriminant:
        """D of L(Phi) as the direct sum of the component groups."""
        n = self.rank
        gens: List[List[Fraction]] = []
        orders: List[int] = []
        blocks = []
        for (letter, m), off, cd in zip(self.components, self.offsets, self.component_discriminants()):
            for g in cd.gens:
                v = [Fraction(0)] * n
                v[off: off + m] = g
                gens.append(v)
            orders += list(cd.form.orders)
            blocks.append(cd.form)
        form = FQF.trivial()
        for b in blocks:
            form = form.direct_sum(b)
        G = self.lattice().gram
        return _GlobalDisc(G, gens, form, self)


class _GlobalDisc(Discriminant):
    """Discriminant of L(Phi) whose coordinates split by component."""

    def __init__(self, gram, gens, form, config: AdeConfiguration):
        super().__init__(gram, gens, form)
        self.config = config
        self.parts = config.component_discriminants()

    def coords(self, w: Sequence) -> Tuple[int, ...]:
        out: List[int] = []
        for (letter, m), off, cd in zip(self.config.components, self.config.offsets, self.parts):
            out += list(cd.coords(list(w[off: off + m])))
        return tuple(out)

    def split(self, c: Sequence[int]) -> List[Tuple[int, ...]]:
        out, k = [], 0
        for cd in self.parts:
            out.append(tuple(c[k: k + cd.form.length]))
            k += cd.form.length
        return out

    def permutation_action(self, perm: Sequence[int]) -> List[List[int]]:
        """Matrix on D of the lattice automorphism sending root i to root perm[i]."""
        n = len(perm)
        out = []
        for v in self.gens:
            w = [Fraction(0)] * n
            for i, a in enumerate(v):
                if a:
                    w[perm[i]] += a
            out.append(list(self.coords(w)))
        return out


@lru_cache(maxsize=None)
def _component_disc(letter: str, n: int) -> Discriminant:
    return discriminant(IntegralLattice.from_rows(cartan_gram(letter, n)))


@lru_cache(maxsize=None)
def coset_minima(letter: str, n: int) -> Dict[Tuple[int, ...], Fraction]:
    """Minimal |norm| of each class of D for one root lattice, for classes with min <= 2."""
    cd = _component_disc(letter, n)
    G = cartan_gram(letter, n)
    Ginv = inverse(G)
    pos = [[-x for x in r] for r in Ginv]
    out: Dict[Tuple[int, ...], Fraction] = {}
    for z, nm in short_vectors(pos, Fraction(2)):
        w = [sum(z[k] * Ginv[k][j] for k in range(n)) for j in range(n)]
        c = cd.coords(w)
        if c not in out or nm < out[c]:
            out[c] = nm
    out[tuple([0] * cd.form.length)] = Fraction(0)
    return out


def has_new_roots(config: AdeConfiguration, disc: "_GlobalDisc", K: Sequence[Tuple[int, ...]]) -> bool:
    """Does pr^{-1}(K) contain a root outside L(Phi)?  Uses per-component coset minima."""
    mins = [coset_minima(l, n) for l, n in config.components]
    for k in K:
        if not any(k):
            continue
        total = Fraction(0)
        for part, table in zip(disc.split(k), mins):
            m = table.get(part)
            if m is None:
                total = None
                break
            total += m
            if total > 2:
                break
        if total is not None and total == 2:
            return True
    return False


# ---------------------------------------------------------------------------
# lattice reduction and short vectors
# ---------------------------------------------------------------------------


def lll_gram(G: Sequence[Sequence], delta: Fraction = Fraction(3, 4)) -> Tuple[IntMatrix, Matrix]:
    """LLL on a positive definite Gram matrix; returns (U, U G U^t)."""
    n = len(G)
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    B = [[Fraction(x) for x in r] for r in G]

    def gso(B):
        mu = [[Fraction(0)] * n for _ in range(n)]
        bb = [Fraction(0)] * n
        for i in range(n):
            for j in range(i):
                mu[i][j] = (B[i][j] - sum(mu[j][k] * mu[i][k] * bb[k] for k in range(j))) / bb[j]
            bb[i] = B[i][i] - sum(mu[i][k] ** 2 * bb[k] for k in range(i))
        return mu, bb

    def apply(i, j, c):  # b_i -= c b_j
        U[i] = [a - c * b for a, b in zip(U[i], U[j])]
        for t in range(n):
            B[i][t] -= c * B[j][t]
        for t in range(n):
            B[t][i] -= c * B[t][j]

    k = 1
    while k < n:
        mu, bb = gso(B)
        for j in range(k - 1, -1, -1):
            c = round(mu[k][j])
            if c:
                apply(k, j, c)
                mu, bb = gso(B)
        if bb[k] >= (delta - mu[k][k - 1] ** 2) * bb[k - 1]:
            k += 1
        else:
            U[k], U[k - 1] = U[k - 1], U[k]
            B[k], B[k - 1] = B[k - 1], B[k]
            for r in B:
                r[k], r[k - 1] = r[k - 1], r[k]
            k = max(k - 1, 1)
    return U, B


def short_vectors(A: Sequence[Sequence], bound: Fraction) -> Iterator[Tuple[Tuple[int, ...], Fraction]]:
    """All nonzero integer x with x A x^t <= bound, A positive definite (exact).

    LLL-reduces first, then runs a Fincke-Pohst search; vectors are returned
    in the original coordinates together with their norms.
    """
    n = len(A)
    if n == 0:
        return
    U, B = lll_gram(A)
    # B = R^t diag(qd) R with R unit upper triangular
    qd = [Fraction(0)] * n
    mu = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        qd[i] = B[i][i] - sum(mu[k][i] ** 2 * qd[k] for k in range(i))
        if qd[i] <= 0:
            raise DomainError("form is not positive definite")
        for j in range(i + 1, n):
            mu[i][j] = (B[i][j] - sum(mu[k][i] * mu[k][j] * qd[k] for k in range(i))) / qd[i]
    x = [0] * n

    def rec(i: int, rem: Fraction):
        if i < 0:
            if any(x):
                yield tuple(x), bound - rem
            return
        c = sum((mu[i][j] * x[j] for j in range(i + 1, n)), Fraction(0))
        # x_i + c squared times qd_i <= rem
        r2 = rem / qd[i]
        lo = -c - _sqrt_ceil(r2)
        hi = -c + _sqrt_ceil(r2)
        for v in range(_ceil(lo), _floor(hi) + 1):
            t = qd[i] * (v + c) ** 2
            if t <= rem:
                x[i] = v
                yield from rec(i - 1, rem - t)
        x[i] = 0

    for y, nm in rec(n - 1, Fraction(bound)):
        z = tuple(sum(y[k] * U[k][j] for k in range(n)) for j in range(n))
        yield z, nm


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _sqrt_ceil(x: Fraction) -> Fraction:
    """An upper bound for sqrt(x), within 1."""
    if x <= 0:
        return Fraction(0)
    return Fraction(isqrt(_ceil(x)) + 1)


def roots_enumerate(L: IntegralLattice) -> List[Tuple[int, ...]]:
    """All vectors of norm -2 of a negative definite lattice."""
    s = L.signature()
    if s[0] != 0:
        raise DomainError("roots_enumerate needs a negative definite lattice")
    A = [[-x for x in r] for r in L.gram]
    return sorted(z for z, nm in short_vectors(A, Fraction(2)) if nm == 2)


# ---------------------------------------------------------------------------
# overlattices
# ---------------------------------------------------------------------------


def overlattice_basis(disc: Discriminant, K: Sequence[Sequence[int]]) -> List[List[Fraction]]:
    """A basis (rows, in L-coordinates) of pr^{-1}(K) via HNF."""
    n = len(disc.gram)
    vecs = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for k in K:
        if any(k):
            vecs.append(disc.lift(k))
    from math import lcm

    N = 1
    for v in vecs:
        for x in v:
            N = lcm(N, x.denominator)
    rows = hnf_rows([[int(x * N) for x in v] for v in vecs])
    return [[Fraction(x, N) for x in r] for r in rows]


def overlattice_gram(disc: Discriminant, K: Sequence[Sequence[int]]) -> Tuple[IntegralLattice, List[List[Fraction]]]:
    q = disc.form
    for k in K:
        if q.q(k) != 0:
            raise DomainError("K is not totally isotropic")
    B = overlattice_basis(disc, K)
    G = disc.gram
    n = len(G)
    M = [[sum(B[a][i] * G[i][j] * B[b][j] for i in range(n) for j in range(n) if B[a][i] and B[b][j])
          for b in range(n)] for a in range(n)]
    if any(x.denominator != 1 for r in M for x in r):
        raise DomainError("overlattice is not integral")
    return IntegralLattice.from_rows([[int(x) for x in r] for r in M]), B


# ---------------------------------------------------------------------------
# genus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenusSymbol:
    s_plus: int
    s_minus: int
    form: FQF

    @property
    def rank(self) -> int:
        return self.s_plus + self.s_minus

    @property
    def det(self) -> int:
        return (-1) ** self.s_minus * self.form.size


def genus_of_lattice_complement(M: IntegralLattice, r_phi: int) -> GenusSymbol:
    """Genus of signature (2, 18 - r_phi) with form (D_M, -q_M)."""
    return GenusSymbol(2, 18 - r_phi, fqf_from_gram(M).negate())


def genus_nonempty(g: GenusSymbol) -> bool:
    from .padic import zp_exists_with

    r = g.rank
    if g.s_plus < 0 or g.s_minus < 0 or r <= 0:
        return False
    q = g.form
    lengths = {p: q.p_part(p).length for p in q.primes}
    if q.length and r < max(lengths.values()):
        return False
    if brown_invariant(q) != (g.s_plus - g.s_minus) % 8:
        return False
    for p in q.primes:
        if not zp_exists_with(r, g.det, q.p_part(p)).exists:
            return False
    if 2 not in q.primes and not zp_exists_with(r, g.det, FQF.trivial(), p=2).exists:
        return False
    return True


# ---------------------------------------------------------------------------
# positive definite binary forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class BinaryForm:
    a: int
    b: int
    c: int

    @property
    def det(self) -> int:
        return self.a * self.c - self.b * self.b

    def gram(self) -> IntMatrix:
        return [[self.a, self.b], [self.b, self.c]]

    def lattice(self) -> IntegralLattice:
        return IntegralLattice.from_rows(self.gram())

    def __str__(self) -> str:
        return f"[{self.a},{self.b},{self.c}]"

    @staticmethod
    def parse(text: str) -> "BinaryForm":
        nums = [int(t) for t in re.findall(r"-?\d+", text)]
        if len(nums) != 3:
            raise DomainError(f"malformed binary form: {text!r}")
        return BinaryForm(*nums)


def gauss_reduce(f: BinaryForm) -> BinaryForm:
    """The reduced GL2(Z)-representative with 0 <= 2b <= a <= c."""
    a, b, c = f.a, f.b, f.c
    if a <= 0 or f.det <= 0:
        raise DomainError("form is not positive definite")
    while True:
        if abs(2 * b) > a:
            # translate y -> y - k x to bring b into (-a/2, a/2]
            k = (2 * b + a) // (2 * a)
            c = c - 2 * k * b + k * k * a
            b = b - k * a
        if a > c:
            a, c = c, a
            continue
        break
    return BinaryForm(a, abs(b), c)


def reduced_forms_of_det(d: int, even: bool = True) -> List[BinaryForm]:
    out = []
    a = 1
    while 3 * a * a <= 4 * d:
        for b in range(0, a // 2 + 1):
            if (d + b * b) % a == 0:
                c = (d + b * b) // a
                if c >= a and (not even or (a % 2 == 0 and c % 2 == 0)):
                    out.append(BinaryForm(a, b, c))
        a += 1
    return out


def definite_genus_representatives(g: GenusSymbol) -> List[BinaryForm]:
    if g.s_minus != 0 or g.s_plus != 2:
        raise DomainError("definite representatives need signature (2, 0)")
    out = [f for f in reduced_forms_of_det(g.form.size) if fqf_isomorphic(fqf_from_gram(f.lattice()), g.form)]
    return sorted(out)


def definite_isometry_group(f: BinaryForm) -> List[IntMatrix]:
    """All integer matrices H with H Gram H^t = Gram (rows are images of the basis)."""
    G = f.gram()
    vecs = {f.a: [], f.c: []}
    for z, nm in short_vectors(G, Fraction(max(f.a, f.c))):
        if nm in vecs:
            vecs[int(nm)].append(z)
    out = []
    for v1 in vecs[f.a]:
        for v2 in vecs[f.c]:
            if v1[0] * v2[1] - v1[1] * v2[0] not in (1, -1):
                continue
            if v1[0] * (G[0][0] * v2[0] + G[0][1] * v2[1]) + v1[1] * (G[1][0] * v2[0] + G[1][1] * v2[1]) == f.b:
                out.append([list(v1), list(v2)])
    return sorted(out)
