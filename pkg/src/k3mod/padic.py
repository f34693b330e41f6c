"""Z_p-lattices attached to finite quadratic forms and the computation of
(det, spin) of lifts of discriminant-form automorphisms.

The pipeline for one prime p:

1. bring (D, q) to a block normal form (new generators H);
2. form the companion lattice with Gram M = F_q^{-1};
3. lift the automorphism T0 to an approximate isometry by an affine F_p
   system at each p-adic digit;
4. peel reflections off the approximate isometry with certified accuracy
   bookkeeping, reading off det and the spinor norm.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .exact import (
    DomainError,
    F2Subspace,
    GammaElement,
    NoSolution,
    SquareClass,
    det,
    fp_kernel,
    fp_solve_affine,
    gamma0_basis,
    gamma_rank,
    identity,
    inverse,
    matmul,
    minord,
    mod_p_int,
    ord_p,
    smallest_nonresidue,
    square_class,
    transpose,
)
from .fqf import FQF, Block, blocks_form, jordan_split

DEFAULT_RETRIES = 8
SHARP_SAMPLES = 64


class RetryNeeded(Exception):
    """The certified accuracy is too small to continue Step 4."""


class CapacityExceeded(RuntimeError):
    """The retry budget for the accuracy doubling was used up."""


# ---------------------------------------------------------------------------
# Jordan forms of Z_p-lattices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZpBlock:
    """A Jordan block: kind 'd' is the rank-1 lattice [p^nu * 2u] (unit u),
    'U' and 'V' are 2^nu times the even unimodular planes."""

    nu: int
    kind: str
    unit: Fraction = Fraction(1)

    @property
    def rank(self) -> int:
        return 1 if self.kind == "d" else 2


@dataclass(frozen=True)
class ZpJordanForm:
    p: int
    blocks: Tuple[ZpBlock, ...]

    @property
    def rank(self) -> int:
        return sum(b.rank for b in self.blocks)

    def gram(self) -> List[List[Fraction]]:
        n = self.rank
        G = [[Fraction(0)] * n for _ in range(n)]
        k = 0
        for b in self.blocks:
            s = Fraction(self.p) ** b.nu
            if b.kind == "d":
                G[k][k] = 2 * s * b.unit
            elif b.kind == "U":
                G[k][k + 1] = G[k + 1][k] = s
            else:
                G[k][k] = G[k + 1][k + 1] = 2 * s
                G[k][k + 1] = G[k + 1][k] = s
            k += b.rank
        return G

    def disc_class(self) -> SquareClass:
        return square_class(self.p, det(self.gram())) if self.rank else square_class(self.p, 1)

    def unimodular_rank(self) -> int:
        return sum(b.rank for b in self.blocks if b.nu == 0)


def zp_normal_form(gram: Sequence[Sequence], p: int) -> ZpJordanForm:
    """Jordan splitting of an even Z_(p)-integral Gram matrix by p-adic pivoting."""
    G = [[Fraction(x) for x in r] for r in gram]
    n = len(G)
    if n and det(G) == 0:
        raise DomainError("degenerate Gram matrix")
    blocks: List[ZpBlock] = []
    active = list(range(n))
    while active:
        best = None
        for a in active:
            for b in active:
                if b < a:
                    continue
                v = ord_p(G[a][b], p)
                if best is None or v < best[0] or (v == best[0] and a == b and best[1] != best[2]):
                    best = (v, a, b)
        _, i, j = best
        if i == j or p != 2:
            if i != j:
                # odd p: replace x_i by x_i + x_j to get a diagonal pivot
                for t in range(n):
                    G[i][t] += G[j][t]
                for t in range(n):
                    G[t][i] += G[t][j]
            piv = G[i][i]
            for t in active:
                if t == i:
                    continue
                c = G[t][i] / piv
                for s in range(n):
                    G[t][s] -= c * G[i][s]
                for s in range(n):
                    G[s][t] -= c * G[s][i]
            v = ord_p(piv, p)
            if p == 2:
                blocks.append(ZpBlock(v - 1, "d", piv / 2 ** v))
            else:
                blocks.append(ZpBlock(v, "d", piv / 2 / Fraction(p) ** v))
            active.remove(i)
        else:
            B = [[G[i][i], G[i][j]], [G[j][i], G[j][j]]]
            Binv = inverse(B)
            for t in active:
                if t in (i, j):
                    continue
                c1 = G[t][i] * Binv[0][0] + G[t][j] * Binv[1][0]
                c2 = G[t][i] * Binv[0][1] + G[t][j] * Binv[1][1]
                for s in range(n):
                    G[t][s] -= c1 * G[i][s] + c2 * G[j][s]
                for s in range(n):
                    G[s][t] -= c1 * G[s][i] + c2 * G[s][j]
            v = ord_p(G[i][j], p)
            a = G[i][i] / 2 ** (v + 1)
            c = G[j][j] / 2 ** (v + 1)
            odd = ord_p(a, 2) == 0 and ord_p(c, 2) == 0
            blocks.append(ZpBlock(v, "V" if odd else "U"))
            active.remove(i)
            active.remove(j)
    return ZpJordanForm(p, tuple(sorted(blocks, key=lambda b: (b.nu, b.kind, b.unit))))


# ---------------------------------------------------------------------------
# the companion lattice
# ---------------------------------------------------------------------------


@dataclass
class CompanionLattice:
    p: int
    blocks: List[Block]
    F: List[List[Fraction]]
    M: List[List[Fraction]]
    orders: Tuple[int, ...]
    r: int
    d: Fraction

    @property
    def length(self) -> int:
        return len(self.orders)


def _block_F(blocks: Sequence[Block]) -> List[List[Fraction]]:
    return [list(r) for r in blocks_form(blocks).F] if blocks else []


def _classes_match(p: int, a, b) -> bool:
    return square_class(p, a) == square_class(p, b)


def build_lambda(blocks: Sequence[Block], r: int, d, p: Optional[int] = None) -> CompanionLattice:
    """Companion lattice of a normal-form block list, adjusted so that it is a
    direct summand of an even Z_p-lattice of rank r and determinant d."""
    blocks = list(blocks)
    if p is None:
        if not blocks:
            raise DomainError("prime needed for a trivial form")
        p = blocks[0].p
    ell = sum(b.rank for b in blocks)
    if r < ell:
        raise DomainError("rank smaller than the length of the form")
    F = _block_F(blocks)
    if ell and r == ell:
        M = inverse(F)
        if not _classes_match(p, det(M), d):
            if p == 2:
                for i, b in enumerate(blocks):
                    if b.kind == "w" and b.nu == 1:
                        k = sum(x.rank for x in blocks[:i])
                        F[k][k] = F[k][k] * 5
                        break
                else:
                    raise DomainError("no even Z_2-lattice with this rank, determinant and form")
                M = inverse(F)
            if not _classes_match(p, det(M), d):
                raise DomainError("no even Z_p-lattice with this rank, determinant and form")
    M = inverse(F) if ell else []
    orders: Tuple[int, ...] = tuple(o for b in blocks for o in b.orders())
    return CompanionLattice(p, blocks, F, M, orders, r, Fraction(d))


@dataclass
class ExistenceResult:
    exists: bool
    witness: Optional[List[List[Fraction]]] = None
    reason: str = ""


def zp_exists_with(r: int, d, q_p: FQF, p: Optional[int] = None) -> ExistenceResult:
    """Is there an even Z_p-lattice of rank r, determinant d and form q_p?"""
    if p is None:
        if not q_p.primes:
            raise DomainError("prime needed for a trivial form")
        p = q_p.primes[0]
    d = Fraction(d)
    if d == 0:
        return ExistenceResult(False, reason="zero determinant")
    ell = q_p.length
    if r < ell:
        return ExistenceResult(False, reason=f"rank {r} < length {ell}")
    _, blocks = jordan_split(q_p) if ell else ([], [])
    F = _block_F(blocks)
    M = inverse(F) if ell else []
    dM = det(M) if ell else Fraction(1)
    rest = r - ell
    if ord_p(d, p) != ord_p(dM, p):
        return ExistenceResult(False, reason="determinant valuation does not match |D|")
    odd_scale_one = any(b.kind == "w" and b.nu == 1 for b in blocks)
    if p != 2:
        if rest == 0:
            if not _classes_match(p, dM, d):
                return ExistenceResult(False, reason="determinant class mismatch")
            return ExistenceResult(True, M)
        c = d / dM / Fraction(2) ** rest
        comp = [[Fraction(2) if i == j else Fraction(0) for j in range(rest)] for i in range(rest)]
        comp[-1][-1] = 2 * c
        return ExistenceResult(True, _diag_sum(M, comp))
    if rest % 2:
        return ExistenceResult(False, reason="rank parity differs from the length at p = 2")
    ratio = d / dM
    if rest == 0:
        if _classes_match(2, ratio, 1):
            return ExistenceResult(True, M)
        if odd_scale_one and _classes_match(2, ratio, Fraction(1, 5)):
            lam = build_lambda(blocks, r, d, 2)
            return ExistenceResult(True, lam.M)
        return ExistenceResult(False, reason="determinant class mismatch")
    k = rest // 2
    sign = (-1) ** k
    U = [[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]]
    V = [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(2)]]
    for last, factor in ((U, 1), (V, -3)):
        for adj in ((1, 5) if odd_scale_one else (1,)):
            if _classes_match(2, ratio, Fraction(sign * factor, adj)):
                Mx = M
                if adj == 5:
                    Mx = build_lambda(blocks, ell, dM / 5, 2).M
                comp = []
                for _ in range(k - 1):
                    comp = _diag_sum(comp, U)
                comp = _diag_sum(comp, last)
                return ExistenceResult(True, _diag_sum(Mx, comp))
    return ExistenceResult(False, reason="determinant class mismatch")


def _diag_sum(A, B):
    n, m = len(A), len(B)
    out = [[Fraction(0)] * (n + m) for _ in range(n + m)]
    for i in range(n):
        for j in range(n):
            out[i][j] = Fraction(A[i][j])
    for i in range(m):
        for j in range(m):
            out[n + i][n + j] = Fraction(B[i][j])
    return out


# ---------------------------------------------------------------------------
# Step 3: lifting
# ---------------------------------------------------------------------------


@dataclass
class ApproxPadicMatrix:
    entries: List[List[Fraction]]
    accuracy: int


def _imatmul(A, B):
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(r, c)) for c in Bt] for r in A]


def _common_den(A) -> int:
    from math import lcm

    den = 1
    for r in A:
        for x in r:
            den = lcm(den, Fraction(x).denominator)
    return den


def _lift_system(E, T0, p: int, nu: int, J: Sequence[int]):
    """Rows and right-hand side of the affine F_p system for one digit."""
    ell = len(T0)
    A: List[List[int]] = []
    b: List[int] = []

    def var(i, k):
        return i * ell + k

    for i in range(ell):
        for j in range(i, ell):
            if p == 2 and i == j:
                continue
            row = [0] * (ell * ell)
            for k in range(ell):
                row[var(i, k)] += T0[j][k]
                row[var(j, k)] += T0[i][k]
            A.append([x % p for x in row])
            b.append((-mod_p_int(E[i][j], p)) % p)
    if p == 2:
        for i in range(ell):
            row = [0] * (ell * ell)
            for k in range(ell):
                row[var(i, k)] += T0[i][k]
            if nu == 0:
                for j in J:
                    row[var(i, j)] += 1
            h = mod_p_int(E[i][i] / 2, 2)
            A.append([x % 2 for x in row])
            b.append(h % 2)
    return A, b


def lift_automorphism(
    lam: CompanionLattice,
    T0: Sequence[Sequence[int]],
    nu_target: int,
    rng: Optional[random.Random] = None,
) -> ApproxPadicMatrix:
    """T with T F T^t = F to p-adic accuracy nu_target and T = T0 mod N_D.

    With ``rng`` given, each digit adds a random kernel vector to the
    particular solution (used to sample lifts of the identity).
    """
    p, F, M = lam.p, lam.F, lam.M
    ell = lam.length
    if ell == 0:
        return ApproxPadicMatrix([], nu_target)
    J = [j for j in range(ell) if M[j][j] != 0 and ord_p(M[j][j], 2) == 1] if p == 2 else []
    # integer bookkeeping: Tn = m T, Fn = D F, Mn = m M
    m = _common_den(M)
    D = _common_den(F)
    Fn = [[int(x * D) for x in r] for r in F]
    Mn = [[int(x * m) for x in r] for r in M]
    Tn = [[int(x) * m for x in r] for r in T0]
    T0m = [[int(x) % p for x in r] for r in T0]
    base = [[m * m * x for x in r] for r in Fn]
    for nu in range(nu_target):
        G = _imatmul(_imatmul(Tn, Fn), [list(c) for c in zip(*Tn)])
        den = m * m * D * p**nu
        E = [[Fraction(G[i][j] - base[i][j], den) for j in range(ell)] for i in range(ell)]
        if any(x and ord_p(x, p) < 0 for r in E for x in r):
            raise AssertionError("E is not p-integral; the lift lost track")
        A, b = _lift_system(E, T0m, p, nu, J)
        try:
            x = fp_solve_affine(A, b, p)
        except NoSolution:
            raise AssertionError("lifting system has no solution") from None
        if rng is not None:
            for kv in fp_kernel(A, p, ell * ell):
                c = rng.randrange(p)
                if c:
                    x = [(a + c * k) % p for a, k in zip(x, kv)]
        Z = [[x[i * ell + k] for k in range(ell)] for i in range(ell)]
        ZM = _imatmul(Z, Mn)
        s = p**nu
        Tn = [[Tn[i][j] + s * ZM[i][j] for j in range(ell)] for i in range(ell)]
    T = [[Fraction(x, m) for x in r] for r in Tn]
    return ApproxPadicMatrix(T, nu_target)


# ---------------------------------------------------------------------------
# Step 4: reflections
# ---------------------------------------------------------------------------


def _inner(u, G, v) -> Fraction:
    return sum((u[i] * G[i][j] * v[j] for i in range(len(u)) for j in range(len(v)) if u[i] and v[j]),
               Fraction(0))


def gram_schmidt(F: Sequence[Sequence[Fraction]]) -> List[List[Fraction]]:
    """S with S F S^t diagonal (rows are the new orthogonal basis in old coordinates)."""
    n = len(F)
    rest = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    out: List[List[Fraction]] = []
    while rest:
        k = next((i for i, v in enumerate(rest) if _inner(v, F, v) != 0), None)
        if k is None:
            pair = next(((i, j) for i in range(len(rest)) for j in range(i + 1, len(rest))
                         if _inner(rest[i], F, rest[j]) != 0), None)
            if pair is None:
                raise DomainError("degenerate form in Gram-Schmidt")
            i, j = pair
            rest[i] = [a + b for a, b in zip(rest[i], rest[j])]
            k = i
        f = rest.pop(k)
        nf = _inner(f, F, f)
        out.append(f)
        rest = [[a - _inner(v, F, f) / nf * b for a, b in zip(v, f)] for v in rest]
    return out


def reflection(v: Sequence[Fraction], G: Sequence[Sequence[Fraction]]) -> List[List[Fraction]]:
    """Matrix of x -> x - 2<x,v>/<v,v> v on row vectors."""
    n = len(v)
    nv = _inner(v, G, v)
    Gv = [sum(G[i][j] * v[j] for j in range(n)) for i in range(n)]
    return [[Fraction(int(i == j)) - 2 * Gv[i] * v[j] / nv for j in range(n)] for i in range(n)]


@dataclass
class Decomposition:
    reflections: List[List[Fraction]]
    gram: List[List[Fraction]]
    det: int
    spin: SquareClass
    final_accuracy: int

    def gamma(self) -> GammaElement:
        return GammaElement(self.det, self.spin)


def _mo(x, p):
    return minord(x, p)


def certify_and_decompose(aT: ApproxPadicMatrix, F: Sequence[Sequence[Fraction]], p: int,
                          S: Optional[List[List[Fraction]]] = None) -> Decomposition:
    """Write the isometry approximated by aT (on the basis with Gram F) as a
    product of reflections; raise RetryNeeded if the accuracy is too small."""
    ell = len(F)
    if ell == 0:
        return Decomposition([], [], 1, square_class(p, 1), aT.accuracy)
    if S is None:
        S = gram_schmidt(F)
    Sinv = inverse(S)
    MV = matmul(matmul(S, F), transpose(S))
    T = matmul(matmul(S, aT.entries), Sinv)
    nu = aT.accuracy + min(0, _mo(S, p)) + min(0, _mo(Sinv, p))
    delta = 1 if p == 2 else 0
    gam = [ord_p(MV[k][k], p) for k in range(ell)]
    g = min(gam)
    refl: List[List[Fraction]] = []
    for k in range(ell):
        fk = [Fraction(int(i == k)) for i in range(ell)]
        ag = T[k]
        lam_k = _mo(ag, p)
        rho = min(delta + nu + g + lam_k, 2 * nu + g)
        if rho <= gam[k] + delta:
            raise RetryNeeded(f"rho guard at k={k}")
        bm = [a - b for a, b in zip(fk, ag)]
        bp = [a + b for a, b in zip(fk, ag)]
        if ord_p(_inner(bm, MV, bm), p) <= gam[k] + 2 * delta:
            b, plus = bm, False
        else:
            b, plus = bp, True
        sigma = min(delta + nu + g, delta + nu + g + lam_k, 2 * nu + g)
        kappa = sigma - (gam[k] + 2 * delta)
        if kappa < 1 + 2 * delta:
            raise RetryNeeded(f"kappa guard at k={k}")
        if ag == fk:
            continue  # row already fixed exactly; no reflection needed
        lam_bar = min(0, lam_k)
        theta = min(kappa + 2 * lam_bar + g, nu + g + lam_bar, 2 * nu + g)
        lam = _mo(T, p)
        tb = reflection(b, MV)
        alpha = _mo(tb, p)
        nu_p = min(nu + alpha, lam + theta - gam[k] - delta, nu + theta - gam[k] - delta)
        T = matmul(T, tb)
        refl.append(b)
        if plus:
            tf = reflection(fk, MV)
            beta = _mo(tf, p)
            T = matmul(T, tf)
            refl.append(fk)
            nu = nu_p + beta
        else:
            nu = nu_p
    if nu < 1:
        raise RetryNeeded("reflection product not certified modulo p")
    spin = Fraction(1)
    for v in refl:
        spin *= _inner(v, MV, v) / 2
    return Decomposition(refl, MV, (-1) ** len(refl), square_class(p, spin), nu)


# ---------------------------------------------------------------------------
# Psi_p
# ---------------------------------------------------------------------------


def _inverse_mod(H: Sequence[Sequence[int]], p: int, N: int) -> List[List[int]]:
    Hi = inverse([[Fraction(x) for x in r] for r in H])
    m = p**N
    return [[mod_p_int(x, m) for x in r] for r in Hi]


def normalize_automorphism(q_p: FQF, T0: Sequence[Sequence[int]]):
    """Step 1: blocks, companion data and T0 in the normal-form basis."""
    H, blocks = jordan_split(q_p)
    new = blocks_form(blocks)
    p = q_p.primes[0]
    N = max(ord_p(o, p) for o in q_p.orders) + 2
    Hinv = _inverse_mod(H, p, N)
    rows = []
    for h in H:
        img = q_p.apply(h, T0)  # image of the new generator, old coordinates
        c = [sum(img[k] * Hinv[k][j] for k in range(len(img))) for j in range(len(img))]
        rows.append([x % o for x, o in zip(c, new.orders)])
    if not new.is_automorphism(rows):
        raise AssertionError("base change did not produce an automorphism")
    return blocks, rows


def initial_accuracy(F, S, p: int) -> int:
    """Starting lift accuracy, padded by the worst valuation in the Gram-Schmidt change of basis."""
    delta = 1 if p == 2 else 0
    MV = matmul(matmul(S, F), transpose(S))
    g = min(ord_p(MV[k][k], p) for k in range(len(F)))
    Sinv = inverse(S)
    worst = 0
    for A in (S, Sinv):
        for r in A:
            for x in r:
                if x:
                    worst = max(worst, abs(ord_p(x, p)))
    return 2 * (1 + 2 * delta + max(0, -g) + worst)


def gamma_of_lift(lam: CompanionLattice, T0, retries: int = DEFAULT_RETRIES,
                  rng: Optional[random.Random] = None, nu0: Optional[int] = None) -> GammaElement:
    """Steps 3 and 4 with accuracy doubling; nu0 overrides the starting accuracy."""
    p = lam.p
    if lam.length == 0:
        return GammaElement.identity(p)
    S = gram_schmidt(lam.F)
    nu = nu0 if nu0 else initial_accuracy(lam.F, S, p)
    state = rng.getstate() if rng is not None else None
    for _ in range(retries + 1):
        if rng is not None:
            rng.setstate(state)
        aT = lift_automorphism(lam, T0, nu, rng)
        try:
            return certify_and_decompose(aT, lam.F, p, S).gamma()
        except RetryNeeded:
            nu *= 2
    raise CapacityExceeded(f"reflection peeling did not certify after {retries} doublings")


def psi_p(q_p: FQF, T0: Sequence[Sequence[int]], r: int, d, retries: int = DEFAULT_RETRIES,
          nu0: Optional[int] = None) -> GammaElement:
    """A representative in Gamma_p of Psi_p(g) for g in O(q_p) given by T0."""
    p = q_p.primes[0] if q_p.primes else None
    if p is None:
        raise DomainError("psi_p needs a nontrivial p-primary form")
    blocks, T = normalize_automorphism(q_p, T0)
    lam = build_lambda(blocks, r, d, p)
    return gamma_of_lift(lam, T, retries, nu0=nu0)


# ---------------------------------------------------------------------------
# Sigma-sharp
# ---------------------------------------------------------------------------


@dataclass
class SigmaSharp:
    p: int
    space: F2Subspace
    source: str

    def contains(self, g: GammaElement) -> bool:
        return self.space.contains(g.bits())

    def elements(self) -> List[GammaElement]:
        out = []
        basis = self.space.basis()
        for mask in range(1 << len(basis)):
            v = [0] * self.space.n
            for i, b in enumerate(basis):
                if mask >> i & 1:
                    v = [(x + y) % 2 for x, y in zip(v, b)]
            out.append(GammaElement.from_bits(self.p, v))
        return sorted(out)


def _space(p: int, elems: Sequence[GammaElement]) -> F2Subspace:
    return F2Subspace(gamma_rank(p), [e.bits() for e in elems])


def sigma_sharp(J: ZpJordanForm, samples: int = SHARP_SAMPLES, seed: int = 0) -> SigmaSharp:
    """Image of O^#(L (x) Z_p) under (det, spin)."""
    p = J.p
    if p != 2:
        unimod = [b for b in J.blocks if b.nu == 0]
        if len(unimod) >= 2:
            return SigmaSharp(p, _space(p, gamma0_basis(p)), "unimodular rank >= 2")
        if len(unimod) == 1:
            g = GammaElement(-1, square_class(p, unimod[0].unit))
            return SigmaSharp(p, _space(p, [g]), "unimodular rank 1")
        return SigmaSharp(p, _space(p, []), "no unimodular summand")
    if any(b.nu == 0 and b.kind in "UV" for b in J.blocks):
        return SigmaSharp(2, _space(2, gamma0_basis(2)), "even unimodular plane")
    return sampled_sigma_sharp(J, samples, seed)


def sampled_sigma_sharp(J: ZpJordanForm, samples: int = SHARP_SAMPLES, seed: int = 0) -> SigmaSharp:
    """Span of (det, spin) of reflections in O^# and of random lifts of the identity."""
    from .zlattice import IntegralLattice, fqf_from_gram

    p = J.p
    G = J.gram()
    dJ = det(G)
    # an integral Gram with the same Z_p-structure (scale units to integers)
    Gi = _integral_model(G, p)
    q = fqf_from_gram(IntegralLattice.from_rows(Gi)).p_part(p)
    _, blocks = jordan_split(q)
    lam = build_lambda(blocks, J.rank, dJ, p)
    elems: List[GammaElement] = []
    ell = lam.length
    M = lam.M
    J_idx = [j for j in range(ell) if M[j][j] != 0 and ord_p(M[j][j] / 2, p) == 0]
    from itertools import combinations

    for size in range(1, min(len(J_idx), 10) + 1):
        for S in combinations(J_idx, size):
            Qv = sum((M[a][b] for a in S for b in S), Fraction(0)) / 2
            if Qv != 0 and ord_p(Qv, p) == 0:
                elems.append(GammaElement(-1, square_class(p, Qv)))
    rng = random.Random(seed)
    ident = [[int(i == j) for j in range(ell)] for i in range(ell)]
    for _ in range(samples):
        sub = random.Random(rng.randrange(1 << 30))
        elems.append(gamma_of_lift(lam, ident, rng=sub))
    return SigmaSharp(p, _space(p, elems), f"sampled ({samples} identity lifts)")


def _integral_model(G, p: int) -> List[List[int]]:
    """Multiply rows/columns by units prime to p to clear denominators."""
    from math import lcm

    n = len(G)
    den = 1
    for r in G:
        for x in r:
            den = lcm(den, Fraction(x).denominator)
    if den % p == 0:
        raise DomainError("Gram matrix is not p-integral")
    # scaling the whole form by den^2 changes nothing up to squares
    return [[int(Fraction(x) * den * den) for x in r] for r in G]


def sigma_sharp_for(r: int, d, q_p: FQF, p: Optional[int] = None, samples: int = SHARP_SAMPLES) -> SigmaSharp:
    res = zp_exists_with(r, d, q_p, p)
    if not res.exists:
        raise DomainError(f"no Z_p-lattice with these invariants: {res.reason}")
    pp = p if p is not None else q_p.primes[0]
    J = zp_normal_form(res.witness, pp)
    return sigma_sharp(J, samples)
