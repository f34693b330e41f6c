"""Assembly of the component group: Gamma_d x Sign modulo the kernel K,
and orbit counting for positive definite transcendental lattices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .exact import F2Subspace, GammaElement, gamma_rank, square_class
from .fqf import FQF, fqf_automorphisms, find_isomorphism
from .padic import DEFAULT_RETRIES, SigmaSharp, psi_p


@dataclass(frozen=True)
class GammaDVector:
    """An element of prod_{p in P(d)} Gamma_p x Sign."""

    primes: Tuple[int, ...]
    parts: Tuple[GammaElement, ...]
    sign: int = 1

    def bits(self) -> Tuple[int, ...]:
        out: List[int] = []
        for g in self.parts:
            out += list(g.bits())
        return tuple(out) + ((0 if self.sign == 1 else 1),)

    def render(self) -> str:
        inner = ", ".join(f"{p}: {g.render()}" for p, g in zip(self.primes, self.parts))
        return f"({inner}; sign={self.sign:+d})"


def ambient_dim(primes: Sequence[int]) -> int:
    return sum(gamma_rank(p) for p in primes) + 1


def identity_vector(primes: Sequence[int]) -> GammaDVector:
    return GammaDVector(tuple(primes), tuple(GammaElement.identity(p) for p in primes), 1)


def beta(primes: Sequence[int], eps: int, s: int, sign: int) -> GammaDVector:
    """Image of (eps, s, sign) in Gamma_d x Sign (s a nonzero rational)."""
    return GammaDVector(
        tuple(primes), tuple(GammaElement(eps, square_class(p, s)) for p in primes), sign
    )


def beta_elements(primes: Sequence[int]) -> List[GammaDVector]:
    """beta(-1, 1, -1), beta(1, -1, -1) and beta(1, p, 1) for p in P(d)."""
    out = [beta(primes, -1, 1, -1), beta(primes, 1, -1, -1)]
    out += [beta(primes, 1, p, 1) for p in primes]
    return out


def sharp_vectors(primes: Sequence[int], sharps: Dict[int, SigmaSharp]) -> List[GammaDVector]:
    """Sigma-sharp at each prime embedded as (.., g at p, ..) x {1}."""
    out = []
    for j, p in enumerate(primes):
        for bits in sharps[p].space.basis():
            parts = [GammaElement.identity(q) for q in primes]
            parts[j] = GammaElement.from_bits(p, bits)
            out.append(GammaDVector(tuple(primes), tuple(parts), 1))
    return out


def gamma_of(q: FQF, g: Sequence[Sequence[int]], r: int, d: int, retries: int = DEFAULT_RETRIES,
             nu0: Optional[int] = None) -> GammaDVector:
    """(Psi_p(g[p]) representatives | p), sign +1, for g in O(q)."""
    primes = tuple(q.primes)
    parts = []
    for p in primes:
        idx = q.p_indices(p)
        block = [[g[i][j] for j in idx] for i in idx]
        if block == [[int(a == b) for b in range(len(idx))] for a in range(len(idx))]:
            parts.append(GammaElement.identity(p))
        else:
            parts.append(psi_p(q.sub(idx), block, r, d, retries, nu0))
    return GammaDVector(primes, tuple(parts), 1)


@dataclass
class ComponentGroup:
    primes: Tuple[int, ...]
    kernel: F2Subspace
    dim: int
    conj_dim: int
    used_gamma: bool = False
    provenance: List[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return 2**self.dim

    @property
    def conj_count(self) -> int:
        return 2**self.conj_dim


def _projected_dim(space: F2Subspace, n: int) -> int:
    return F2Subspace(n - 1, [b[:-1] for b in space.basis()]).dim


def component_group(
    sharps: Sequence[GammaDVector],
    gammas: Sequence[GammaDVector],
    betas: Sequence[GammaDVector],
    primes: Sequence[int],
) -> ComponentGroup:
    """(Gamma_d x Sign) / K with K spanned by the three families of generators."""
    n = ambient_dim(primes)
    K = F2Subspace(n)
    prov = []
    for tag, vecs in (("sharp", sharps), ("beta", betas), ("gamma", gammas)):
        for v in vecs:
            if K.add(v.bits()):
                prov.append(f"{tag}:{v.render()}")
    dim = n - K.dim
    conj_dim = (n - 1) - _projected_dim(K, n)
    return ComponentGroup(tuple(primes), K, dim, conj_dim, bool(gammas), prov)


def mm_components(
    q: FQF,
    sharps: Dict[int, SigmaSharp],
    gbar_gens: Sequence[Sequence[Sequence[int]]],
    r: int,
    d: int,
    retries: int = DEFAULT_RETRIES,
    nu0: Optional[int] = None,
) -> ComponentGroup:
    """Component group of one algebraic class; gamma is only computed when K' is proper."""
    primes = tuple(q.primes)
    sv = sharp_vectors(primes, sharps)
    bv = beta_elements(primes)
    base = component_group(sv, [], bv, primes)
    if base.dim == 0:
        return base
    gammas: List[GammaDVector] = []
    seen = set()
    for g in gbar_gens:
        key = tuple(map(tuple, g))
        if key in seen:
            continue
        seen.add(key)
        gv = gamma_of(q, g, r, d, retries, nu0)
        if base.kernel.contains(gv.bits()):
            continue
        gammas.append(gv)
        cur = component_group(sv, gammas, bv, primes)
        if cur.dim == 0:
            return cur
    return component_group(sv, gammas, bv, primes)


# ---------------------------------------------------------------------------
# positive definite branch
# ---------------------------------------------------------------------------


def _compose(A: Sequence[Sequence[int]], B: Sequence[Sequence[int]], orders: Sequence[int]) -> Tuple[Tuple[int, ...], ...]:
    """Matrix of 'first A then B'; rows of B are images in a group with the given orders."""
    m = len(orders)
    return tuple(
        tuple(sum(row[k] * B[k][j] for k in range(len(row))) % orders[j] for j in range(m))
        for row in A
    )


@dataclass
class DefiniteOrbits:
    r: int
    c: int
    orbit_sizes: List[int]

    @property
    def total(self) -> int:
        return self.r + self.c

    @property
    def conj_total(self) -> int:
        return self.r + self.c // 2


def definite_orbits(
    qG: FQF,
    qT: FQF,
    gbar_gens: Sequence[Sequence[Sequence[int]]],
    ot_actions: Sequence[Tuple[Sequence[Sequence[int]], int]],
    alpha0: Optional[Sequence[Sequence[int]]] = None,
) -> DefiniteOrbits:
    """Count Gbar \\ (O(q_T) x Sign) / O(T).

    Pairs (gamma, theta) are handled as (alpha0 gamma, theta), i.e. as
    isomorphisms beta: q_G -> q_T; Gbar acts by g beta and O(T) by
    beta h with theta multiplied by det(h).  ``ot_actions`` lists
    (matrix on D_T, det) for the elements (or generators) of O(T).
    """
    if alpha0 is None:
        alpha0 = find_isomorphism(qG, qT)
        if alpha0 is None:
            raise ValueError("forms are not isomorphic")
    auts = fqf_automorphisms(qT).elements()
    To = qT.orders
    start = [_compose(alpha0, h, To) for h in auts]
    index = {}
    items = []
    for b in start:
        for th in (1, -1):
            index[(b, th)] = len(items)
            items.append((b, th))
    parent = list(range(len(items)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for i, (b, th) in enumerate(items):
        for g in gbar_gens:
            union(i, index[(_compose(g, b, To), th)])
        for h, dt in ot_actions:
            union(i, index[(_compose(b, h, To), th * dt)])
    orbits: Dict[int, List[int]] = {}
    for i in range(len(items)):
        orbits.setdefault(find(i), []).append(i)
    r = c = 0
    for root, members in orbits.items():
        b, th = items[root]
        if find(index[(b, -th)]) == root:
            r += 1
        else:
            c += 1
    return DefiniteOrbits(r, c, sorted(len(m) for m in orbits.values()))
