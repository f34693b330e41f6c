from __future__ import annotations

import cmath
import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from k3mod.fqf import Block, FQF, blocks_form

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line[1])


# ---------------------------------------------------------------------------
# brute-force oracles shared by several test modules
# ---------------------------------------------------------------------------


def value_histogram(q: FQF):
    """Counts of (order, q-value) over all elements; any isomorphism preserves it."""
    from collections import Counter

    return Counter((q.order_of(x), q.q(x)) for x in q.elements())


def brute_isomorphic(q1: FQF, q2: FQF) -> bool:
    """Try every assignment of generator images with matching order and q value."""
    if q1.size != q2.size:
        return False
    if q1.length == 0:
        return True
    if value_histogram(q1) != value_histogram(q2):
        return False
    elems = list(q2.elements())
    cands = []
    for i in range(q1.length):
        gi = tuple(int(i == j) for j in range(q1.length))
        o, v = q1.order_of(gi), q1.q(gi)
        cands.append([y for y in elems if q2.order_of(y) == o and q2.q(y) == v])
    gens1 = [tuple(int(i == j) for j in range(q1.length)) for i in range(q1.length)]

    def rec(img):
        i = len(img)
        if i == q1.length:
            span = set()
            for coeffs in itertools.product(*(range(o) for o in q1.orders)):
                y = [0] * q2.length
                for c, v in zip(coeffs, img):
                    y = [a + c * b for a, b in zip(y, v)]
                span.add(q2.reduce(y))
            return len(span) == q2.size
        for y in cands[i]:
            if all(q2.b(y, img[j]) == q1.b(gens1[i], gens1[j]) for j in range(i)):
                if rec(img + [y]):
                    return True
        return False

    return rec([])


def gauss_sum_brown(q: FQF) -> int:
    """Brown invariant from the Milgram Gauss sum, numerically."""
    s = sum(cmath.exp(1j * math.pi * float(q.q(x))) for x in q.elements())
    s /= math.sqrt(q.size)
    k = round(cmath.phase(s) / (math.pi / 4)) % 8
    return k


def all_subgroups(q: FQF):
    """Every subgroup, grown one cyclic factor at a time: H + <x> = {h + k x}."""
    elems = list(q.elements())
    index = {x: i for i, x in enumerate(elems)}
    add = [[index[q.reduce([a + b for a, b in zip(x, y)])] for y in elems] for x in elems]
    zero = index[tuple([0] * q.length)]
    multiples = []
    for i in range(len(elems)):
        cyc = [zero]
        while add[cyc[-1]][i] != zero:
            cyc.append(add[cyc[-1]][i])
        multiples.append(cyc)
    found = {frozenset({zero})}
    frontier = list(found)
    while frontier:
        nxt = []
        for H in frontier:
            for i in range(len(elems)):
                if i in H:
                    continue
                K = frozenset(add[h][m] for h in H for m in multiples[i])
                if K not in found:
                    found.add(K)
                    nxt.append(K)
        frontier = nxt
    return {frozenset(elems[i] for i in K) for K in found}


# ---------------------------------------------------------------------------
# p-primary forms of bounded size
# ---------------------------------------------------------------------------


def _p_blocks(p: int, max_size: int):
    out = []
    nu = 1
    while p**nu <= max_size:
        if p == 2:
            out += [Block(2, nu, "w", e) for e in (1, 3, 5, 7)]
            if 4**nu <= max_size:
                out += [Block(2, nu, "u"), Block(2, nu, "v")]
        else:
            out += [Block(p, nu, "w", 1), Block(p, nu, "w", -1)]
        nu += 1
    return out


def block_forms(p: int, max_size: int):
    """All block sums of total order <= max_size (as sorted block tuples)."""
    blocks = _p_blocks(p, max_size)
    out = []

    def rec(start, acc, size):
        if acc:
            out.append(tuple(acc))
        for i in range(start, len(blocks)):
            b = blocks[i]
            s = size * b.p ** (b.nu * b.rank)
            if s <= max_size:
                rec(i, acc + [b], s)

    rec(0, [], 1)
    return out


@st.composite
def even_grams(draw, max_rank=6, max_entry=4):
    n = draw(st.integers(1, max_rank))
    G = [[0] * n for _ in range(n)]
    for i in range(n):
        G[i][i] = 2 * draw(st.integers(-max_entry, max_entry))
        for j in range(i + 1, n):
            G[i][j] = G[j][i] = draw(st.integers(-max_entry, max_entry))
    return G


def det_int(G):
    from k3mod.exact import det

    return int(det([[Fraction(x) for x in r] for r in G]))


@pytest.fixture(scope="session")
def forms_upto_64():
    """One representative per p-primary block sum with |D| <= 64, p in {2, 3, 5}."""
    return {p: [blocks_form(bs) for bs in block_forms(p, 64)] for p in (2, 3, 5)}


# ---------------------------------------------------------------------------
# Psi_p with the lift and reflection product checked on every call
# ---------------------------------------------------------------------------


def ambient_rank_det(q: FQF, p: int):
    """Smallest (r, d) with r in {l, l+1, l+2} for which an even Z_p-lattice exists."""
    from k3mod.exact import smallest_nonresidue
    from k3mod.padic import zp_exists_with

    n, size = q.length, q.size
    units = (1, 3, 5, 7) if p == 2 else (1, smallest_nonresidue(p))
    for r in (n, n + 1, n + 2):
        for s in (1, -1):
            for u in units:
                for d in (Fraction(s * u, size), s * u * size):
                    if zp_exists_with(r, d, q, p).exists:
                        return r, d
    raise AssertionError("no ambient lattice found")


def checked_psi(q: FQF, g, r: int, d, rng=None):
    """Psi_p(g) recomputed step by step; asserts the lift and reconstruction bounds."""
    from k3mod.exact import GammaElement, det, inverse, matmul, minord, transpose
    from k3mod.padic import (
        DEFAULT_RETRIES,
        RetryNeeded,
        build_lambda,
        certify_and_decompose,
        gram_schmidt,
        initial_accuracy,
        lift_automorphism,
        normalize_automorphism,
        reflection,
    )

    p = q.primes[0]
    blocks, T0 = normalize_automorphism(q, g)
    lam = build_lambda(blocks, r, d, p)
    if lam.length == 0:
        return GammaElement.identity(p)
    F = lam.F
    n = lam.length
    S = gram_schmidt(F)
    Sinv = inverse(S)
    nu = initial_accuracy(F, S, p)
    state = rng.getstate() if rng is not None else None
    for _ in range(DEFAULT_RETRIES + 1):
        if rng is not None:
            rng.setstate(state)
        aT = lift_automorphism(lam, T0, nu, rng)
        T = aT.entries
        drift = [[a - b for a, b in zip(x, y)] for x, y in zip(matmul(matmul(T, F), transpose(T)), F)]
        assert minord(drift, p) >= nu
        assert minord([[a - b for a, b in zip(x, y)] for x, y in zip(T, T0)], p) >= 1
        try:
            dec = certify_and_decompose(aT, F, p, S)
        except RetryNeeded:
            nu *= 2
            continue
        R = matmul(matmul(S, T), Sinv)
        for v in dec.reflections:
            R = matmul(R, reflection(v, dec.gram))
        ident = [[int(i == j) for j in range(n)] for i in range(n)]
        assert minord([[a - b for a, b in zip(x, y)] for x, y in zip(R, ident)], p) >= dec.final_accuracy >= 1
        assert minord([det(T) - dec.det], p) >= 1
        return dec.gamma()
    raise AssertionError("retry budget exhausted")


def automorphism_generators(q: FQF):
    """A short generating list of O(q), kept only while it enlarges the span."""
    from k3mod.fqf import fqf_automorphisms, group_closure

    A = fqf_automorphisms(q)
    n = q.length
    cur = {tuple(tuple(int(i == j) for j in range(n)) for i in range(n))}
    gens = []
    for g in A.generators:
        if tuple(map(tuple, g)) in cur:
            continue
        gens.append(g)
        cur = set(group_closure(q, gens))
        if len(cur) == A.order:
            break
    return gens


def psi_suite(p: int, max_size: int, seed: int = 1):
    """Well-definedness and homomorphism of Psi_p modulo Sigma-sharp on one form per class.

    Returns (number of forms, number of Psi_p calls).
    """
    import random

    from k3mod.fqf import fqf_key
    from k3mod.padic import sigma_sharp_for

    rng = random.Random(seed)
    seen = set()
    calls = 0
    for bs in block_forms(p, max_size):
        q = blocks_form(bs)
        key = fqf_key(q)
        if key in seen:
            continue
        seen.add(key)
        r, d = ambient_rank_det(q, p)
        sharp = sigma_sharp_for(r, d, q, p)
        assert all(x.in_gamma0() for x in sharp.elements())
        gens = automorphism_generators(q)
        ident = [[int(i == j) for j in range(q.length)] for i in range(q.length)]
        assert sharp.contains(checked_psi(q, ident, r, d))
        values = []
        for g in gens:
            a = checked_psi(q, g, r, d)
            b = checked_psi(q, g, r, d, random.Random(rng.randrange(1 << 30)))
            assert sharp.contains(a * b), (bs, g)
            values.append(a)
            calls += 2
        for i in range(len(gens)):
            g, h = gens[i], gens[(i + 1) % len(gens)]
            gh = q.compose(g, h)
            assert sharp.contains(checked_psi(q, gh, r, d) * values[i] * values[(i + 1) % len(gens)]), (bs, i)
            calls += 1
        calls += 1
    return len(seen), calls
