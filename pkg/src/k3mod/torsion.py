"""Classes of torsion sections and their narrowness at reducible fibers.

A torsion section is described by a vector u_L in the dual of L(Phi): on
every fiber it is either zero (the section meets the same component as
the zero section, i.e. it is narrow there) or the dual vector of a simple
component of multiplicity one.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import List, Optional, Sequence, Tuple

from .exact import inverse
from .moduli import (
    HYPERBOLIC_U,
    MarkingGroupSpec,
    enumerate_E,
    g_orbits_and_stabilizers,
    parse_torsion,
    perm_matrices,
)
from .zlattice import AdeConfiguration, cartan_gram, highest_root_marks


@dataclass(frozen=True)
class FiberData:
    """Marks of one reducible fiber; theta_0 = v_f - sum m_nu theta_nu."""

    letter: str
    rank: int
    marks: Tuple[int, ...]

    @property
    def symbol(self) -> str:
        return f"{self.letter}{self.rank}"

    def simple_nodes(self) -> List[int]:
        """Non-identity simple components, i.e. nodes of mark 1."""
        return [i for i, m in enumerate(self.marks) if m == 1]

    def theta0_pairings(self) -> List[int]:
        G = cartan_gram(self.letter, self.rank)
        return [-sum(self.marks[k] * G[k][j] for k in range(self.rank)) for j in range(self.rank)]

    def check(self) -> None:
        G = cartan_gram(self.letter, self.rank)
        m = self.marks
        n = self.rank
        norm = sum(m[i] * G[i][j] * m[j] for i in range(n) for j in range(n))
        if norm != -2:
            raise AssertionError(f"{self.symbol}: theta_0 has norm {norm}")
        pair = self.theta0_pairings()
        if any(x < 0 for x in pair) or not any(pair):
            raise AssertionError(f"{self.symbol}: theta_0 does not attach to the diagram")
        # (1, m) spans the kernel of the extended Gram matrix
        ext = [[-2] + pair] + [[pair[i]] + list(G[i]) for i in range(n)]
        vec = [1] + list(m)
        if any(sum(r[j] * vec[j] for j in range(n + 1)) for r in ext):
            raise AssertionError(f"{self.symbol}: marks are not the null vector of the affine diagram")


def _highest_root(letter: str, n: int) -> List[int]:
    """Walk up from a simple root by adding simple roots while the sum stays a root."""
    G = cartan_gram(letter, n)
    theta = [0] * n
    theta[0] = 1
    moved = True
    while moved:
        moved = False
        for i in range(n):
            if sum(theta[k] * G[k][i] for k in range(n)) == 1:
                theta[i] += 1
                moved = True
                break
    return theta


@lru_cache(maxsize=None)
def fiber_marks(letter: str, n: int) -> FiberData:
    marks = _highest_root(letter, n)
    if marks != highest_root_marks(letter, n):
        raise AssertionError(f"{letter}{n}: highest root walk disagrees with the mark table")
    fd = FiberData(letter, n, tuple(marks))
    fd.check()
    return fd


@dataclass(frozen=True)
class TorsionClass:
    """u = -Q(u_L) v_f + v_s + u_L together with the met component per fiber."""

    u_L: Tuple[Fraction, ...]
    met: Tuple[Optional[int], ...]  # None means the identity component
    disc_class: Tuple[int, ...]
    coeff_vf: Fraction

    @property
    def narrow(self) -> Tuple[bool, ...]:
        return tuple(m is None for m in self.met)

    @property
    def is_zero(self) -> bool:
        return all(self.narrow)

    def vector(self) -> Tuple[Fraction, ...]:
        """Coordinates on (v_f, v_s, simple roots of Phi)."""
        return (self.coeff_vf, Fraction(1)) + self.u_L


@dataclass
class TorsionClassReport:
    config: AdeConfiguration
    K: frozenset
    classes: List[TorsionClass]

    def signature(self) -> Tuple:
        """Sorted over nonzero sections: per component type, how many fibers are narrow."""
        types = sorted(set(self.config.components))
        sig = []
        for t in self.classes:
            if t.is_zero:
                continue
            c = Counter(comp for comp, nar in zip(self.config.components, t.narrow) if nar)
            sig.append(tuple((f"{l}{n}", c[(l, n)]) for l, n in types))
        return tuple(sorted(sig))


def _pair(x: Sequence, y: Sequence, G) -> Fraction:
    n = len(G)
    return sum(Fraction(x[i]) * G[i][j] * y[j] for i in range(n) for j in range(n) if x[i] and y[j])


def u_gram(config: AdeConfiguration) -> List[List[int]]:
    """Gram of U + L(Phi) on (v_f, v_s, simple roots)."""
    L = config.lattice().gram
    n = config.rank
    G = [[0] * (n + 2) for _ in range(n + 2)]
    for i in range(2):
        for j in range(2):
            G[i][j] = HYPERBOLIC_U[i][j]
    for i in range(n):
        for j in range(n):
            G[i + 2][j + 2] = L[i][j]
    return G


def torsion_classes(config: AdeConfiguration, disc, K: frozenset) -> TorsionClassReport:
    """All u_L meeting the fiberwise condition whose class lies in K."""
    n = config.rank
    G = config.lattice().gram
    options = []
    for (letter, m), off in zip(config.components, config.offsets):
        fd = fiber_marks(letter, m)
        Ginv = inverse(cartan_gram(letter, m))
        opts: List[Tuple[Optional[int], List[Fraction]]] = [(None, [Fraction(0)] * m)]
        for mu in fd.simple_nodes():
            opts.append((mu, list(Ginv[mu])))
        options.append((off, m, opts))
    out = []
    for choice in product(*(o[2] for o in options)):
        u = [Fraction(0)] * n
        for (off, m, _), (_, vec) in zip(options, choice):
            u[off: off + m] = vec
        c = disc.coords(u)
        if c not in K:
            continue
        qn = _pair(u, u, G) / 2
        t = TorsionClass(tuple(u), tuple(ch[0] for ch in choice), c, -qn)
        _check_section(config, t)
        out.append(t)
    if len(out) != len(K):
        raise AssertionError(f"found {len(out)} torsion classes for a group of order {len(K)}")
    out.sort(key=lambda t: (not t.is_zero, t.disc_class))
    return TorsionClassReport(config, K, out)


def _check_section(config: AdeConfiguration, t: TorsionClass) -> None:
    G = u_gram(config)
    u = t.vector()
    n = len(u)
    vf = [1] + [0] * (n - 1)
    if _pair(u, u, G) != -2 or _pair(u, vf, G) != 1:
        raise AssertionError("torsion class violates <u,u> = -2 or <u,v_f> = 1")
    for (letter, m), off, met in zip(config.components, config.offsets, t.met):
        fd = fiber_marks(letter, m)
        for nu in range(m):
            root = [0] * n
            root[2 + off + nu] = 1
            want = 1 if nu == met else 0
            if _pair(u, root, G) != want:
                raise AssertionError("torsion class pairs wrongly with a fiber component")
        theta0 = [Fraction(0)] * n
        theta0[0] = Fraction(1)
        for nu, mk in enumerate(fd.marks):
            theta0[2 + off + nu] = Fraction(-mk)
        if _pair(u, theta0, G) != (1 if met is None else 0):
            raise AssertionError("torsion class pairs wrongly with the identity component")


@dataclass
class NarrownessEntry:
    K: frozenset
    orbit_size: int
    report: TorsionClassReport

    @property
    def signature(self) -> Tuple:
        return self.report.signature()


def narrowness_report(
    phi: str, torsion="[1]", group: MarkingGroupSpec = MarkingGroupSpec("aut")
) -> List[NarrownessEntry]:
    config = AdeConfiguration.parse(phi)
    tor = parse_torsion(torsion) if isinstance(torsion, str) else tuple(torsion)
    disc = config.discriminant()
    E = enumerate_E(config, tor, disc)
    gens, invs = perm_matrices(disc, group.generators(config))
    out = []
    for orb in g_orbits_and_stabilizers(E, gens, invs, disc.form.orders):
        out.append(NarrownessEntry(orb.rep, orb.size, torsion_classes(config, disc, orb.rep)))
    out.sort(key=lambda e: e.signature)
    return out


def render_signature(sig: Tuple) -> str:
    if not sig:
        return "zero section only"
    parts = []
    for sec in sig:
        parts.append(", ".join(f"{sym}:{k}" for sym, k in sec))
    return " | ".join(f"narrow {{{p}}}" for p in parts)
