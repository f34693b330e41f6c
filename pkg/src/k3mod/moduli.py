"""Connected components of moduli of elliptic K3 surfaces of a fixed type.

For a configuration Phi, torsion group A and marking group G, the
pipeline enumerates the even overlattices M of L(Phi) with M/L = A and no
new roots, splits them into G-orbits, and for each orbit counts the
classes of (T, alpha, theta) modulo the image of the stabiliser.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .exact import DomainError
from .fqf import FQF, CapacityError, group_closure, isotropic_subgroups, normalize_abelian
from .mmgroup import DefiniteOrbits, definite_orbits, mm_components
from .padic import DEFAULT_RETRIES, sigma_sharp_for
from .zlattice import (
    AdeConfiguration,
    BinaryForm,
    GenusSymbol,
    IntegralLattice,
    definite_genus_representatives,
    definite_isometry_group,
    discriminant,
    genus_nonempty,
    has_new_roots,
    overlattice_gram,
)

Matrix = Tuple[Tuple[int, ...], ...]

# Gram matrix of the hyperbolic plane on (fiber class, zero-section class)
HYPERBOLIC_U = ((0, 1), (1, -2))


def parse_torsion(text: str) -> Tuple[int, ...]:
    """'[2]', '[3,3]', '[1]', '2x4' -> invariant factors."""
    nums = [int(t) for t in re.findall(r"\d+", text)]
    if not nums or any(n < 1 for n in nums):
        raise DomainError(f"malformed torsion group: {text!r}")
    return normalize_abelian(nums)


def torsion_str(inv: Sequence[int]) -> str:
    return "[" + ",".join(str(a) for a in (inv or (1,))) + "]"


@dataclass(frozen=True)
class MarkingGroupSpec:
    """'aut' (full diagram group), 'trivial', or explicit root permutations."""

    kind: str = "aut"
    perms: Tuple[Tuple[int, ...], ...] = ()

    @staticmethod
    def parse(text: str) -> "MarkingGroupSpec":
        text = text.strip()
        if text in ("aut", "full"):
            return MarkingGroupSpec("aut")
        if text in ("trivial", "id", "1"):
            return MarkingGroupSpec("trivial")
        perms = tuple(tuple(int(t) for t in re.findall(r"\d+", line)) for line in text.split(";") if line.strip())
        return MarkingGroupSpec("explicit", perms)

    def generators(self, config: AdeConfiguration) -> List[Tuple[int, ...]]:
        if self.kind == "aut":
            return config.aut_generators()
        if self.kind == "trivial":
            return []
        n = config.rank
        G = config.lattice().gram
        for p in self.perms:
            if sorted(p) != list(range(n)):
                raise DomainError("marking group generator is not a permutation of the roots")
            if any(G[p[i]][p[j]] != G[i][j] for i in range(n) for j in range(n)):
                raise DomainError("marking group generator is not a diagram automorphism")
        return list(self.perms)

    def order(self, config: AdeConfiguration) -> int:
        if self.kind == "aut":
            return config.aut_order()
        if self.kind == "trivial":
            return 1
        n = config.rank
        ident = tuple(range(n))
        seen = {ident}
        frontier = [ident]
        while frontier:
            nxt = []
            for x in frontier:
                for g in self.perms:
                    y = tuple(g[x[i]] for i in range(n))
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        return len(seen)

    def render(self):
        if self.kind == "explicit":
            return [list(p) for p in self.perms]
        return self.kind


# ---------------------------------------------------------------------------
# orbits of overlattices
# ---------------------------------------------------------------------------


def _apply(x: Sequence[int], A: Matrix, orders: Sequence[int]) -> Tuple[int, ...]:
    n = len(orders)
    return tuple(sum(x[i] * A[i][j] for i in range(len(x)) if x[i]) % orders[j] for j in range(n))


def _mul(A: Matrix, B: Matrix, orders: Sequence[int]) -> Matrix:
    return tuple(_apply(r, B, orders) for r in A)


def _act_on_subgroup(K: frozenset, A: Matrix, orders) -> frozenset:
    return frozenset(_apply(x, A, orders) for x in K)


def _perm_inverse(p: Sequence[int]) -> Tuple[int, ...]:
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


@dataclass
class Orbit:
    rep: frozenset
    size: int
    stabilizer: List[Matrix]  # Schreier generators, as matrices on D_L


def g_orbits_and_stabilizers(
    subgroups: Sequence[frozenset], gens: Sequence[Matrix], gens_inv: Sequence[Matrix], orders
) -> List[Orbit]:
    """Partition the subgroups into orbits; stabiliser generators by Schreier's lemma."""
    n = len(orders)
    ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
    todo = set(subgroups)
    out = []
    for K in subgroups:
        if K not in todo:
            continue
        trans = {K: (ident, ident)}
        frontier = [K]
        while frontier:
            nxt = []
            for Y in frontier:
                t, tinv = trans[Y]
                for g, gi in zip(gens, gens_inv):
                    Z = _act_on_subgroup(Y, g, orders)
                    if Z not in trans:
                        trans[Z] = (_mul(t, g, orders), _mul(gi, tinv, orders))
                        nxt.append(Z)
            frontier = nxt
        stab = set()
        for Y, (t, _) in trans.items():
            for g in gens:
                Z = _act_on_subgroup(Y, g, orders)
                s = _mul(_mul(t, g, orders), trans[Z][1], orders)
                if s != ident:
                    stab.add(s)
        for Y in trans:
            todo.discard(Y)
        out.append(Orbit(K, len(trans), sorted(stab)))
    return out


# ---------------------------------------------------------------------------
# the discriminant form of an overlattice
# ---------------------------------------------------------------------------


@dataclass
class OverlatticeData:
    K: frozenset
    lattice: IntegralLattice
    basis: List
    form: FQF  # q_M
    dl_coords: List[Tuple[int, ...]]  # D_M generators in D_L coordinates
    table: Dict[Tuple[int, ...], Tuple[int, ...]]  # coset min -> D_M coords

    def coset_key(self, x: Sequence[int], orders) -> Tuple[int, ...]:
        return min(tuple((a + b) % o for a, b, o in zip(x, k, orders)) for k in self.K)

    def induced(self, A: Matrix, orders) -> List[List[int]]:
        """Automorphism of D_M induced by a D_L automorphism preserving K."""
        rows = []
        for x in self.dl_coords:
            y = _apply(x, A, orders)
            rows.append(list(self.table[self.coset_key(y, orders)]))
        return rows


def overlattice_data(disc, K: frozenset) -> OverlatticeData:
    orders = disc.form.orders
    M, B = overlattice_gram(disc, sorted(K))
    dm = discriminant(M)
    n = len(B)
    dl = []
    for g in dm.gens:
        w = [sum(g[k] * B[k][j] for k in range(n)) for j in range(n)]
        dl.append(disc.coords(w))
    data = OverlatticeData(K, M, B, dm.form, dl, {})
    qm = dm.form
    for c in qm.elements():
        x = [0] * len(orders)
        for a, v in zip(c, dl):
            if a:
                x = [(s + a * t) % o for s, t, o in zip(x, v, orders)]
        data.table[data.coset_key(x, orders)] = tuple(c)
    if len(data.table) != qm.size:
        raise AssertionError("D_M coordinates are not injective on K-perp / K")
    return data


def gbar_image(data: OverlatticeData, stabilizer: Sequence[Matrix], orders) -> List[List[List[int]]]:
    """Deduplicated non-identity automorphisms of D_M induced by the stabiliser."""
    n = data.form.length
    ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
    seen = set()
    out = []
    for s in stabilizer:
        m = data.induced(s, orders)
        key = tuple(map(tuple, m))
        if key != ident and key not in seen:
            seen.add(key)
            out.append(m)
    out.sort()
    return out


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class ClassResult:
    key: str
    branch: str
    orbit_size: int
    stab_order: int
    gbar_order: Optional[int]
    count: int
    conj_count: int
    forms: List[BinaryForm] = field(default_factory=list)
    rc: List[List[int]] = field(default_factory=list)
    dim: Optional[int] = None
    conj_dim: Optional[int] = None
    K: frozenset = frozenset()

    def as_json(self) -> dict:
        out = {
            "key": self.key,
            "branch": self.branch,
            "orbit_size": self.orbit_size,
            "stab_order": self.stab_order,
            "gbar_order": self.gbar_order,
            "forms": [[f.a, f.b, f.c] for f in self.forms],
            "rc": self.rc[0] if len(self.rc) == 1 else self.rc,
            "count": self.count,
            "conj_count": self.conj_count,
        }
        if self.branch == "mm":
            out["dim"] = self.dim
            out["conj_dim"] = self.conj_dim
        return out


@dataclass
class ComponentReport:
    phi: str
    torsion: Tuple[int, ...]
    group: MarkingGroupSpec
    classes: List[ClassResult]
    realized: bool = True

    @property
    def total(self) -> int:
        return sum(c.count for c in self.classes)

    @property
    def total_mod_conj(self) -> int:
        return sum(c.conj_count for c in self.classes)

    def as_json(self) -> dict:
        out = {
            "phi": self.phi,
            "torsion": list(self.torsion) or [1],
            "group": self.group.render(),
            "classes": [c.as_json() for c in self.classes],
            "total": self.total,
            "total_mod_conj": self.total_mod_conj,
        }
        if not self.realized:
            out["note"] = "type not realized at lattice level"
        return out

    def counts(self) -> List[int]:
        return sorted(c.count for c in self.classes)


def _orbit_key(K: frozenset) -> str:
    gens = sorted(x for x in K if any(x))
    return ";".join(",".join(map(str, x)) for x in gens) or "0"


def enumerate_E(config: AdeConfiguration, torsion: Sequence[int], disc=None) -> List[frozenset]:
    """Isotropic subgroups of shape A whose overlattice has no new roots."""
    disc = disc or config.discriminant()
    subs = isotropic_subgroups(disc.form, shape=torsion)
    return [K for K in subs if not has_new_roots(config, disc, K)]


def perm_matrices(disc, perms) -> Tuple[List[Matrix], List[Matrix]]:
    mats = [tuple(map(tuple, disc.permutation_action(p))) for p in perms]
    invs = [tuple(map(tuple, disc.permutation_action(_perm_inverse(p)))) for p in perms]
    return mats, invs


def compute_components(
    phi: str,
    torsion="[1]",
    group: MarkingGroupSpec = MarkingGroupSpec("aut"),
    retries: int = DEFAULT_RETRIES,
    nu0: Optional[int] = None,
) -> ComponentReport:
    config = AdeConfiguration.parse(phi)
    tor = parse_torsion(torsion) if isinstance(torsion, str) else normalize_abelian(torsion)
    r_phi = config.rank
    if r_phi > 18:
        raise DomainError("configurations of rank above 18 do not occur")
    disc = config.discriminant()
    orders = disc.form.orders
    E = enumerate_E(config, tor, disc)
    if not E:
        return ComponentReport(str(config), tor, group, [], realized=False)
    gens, invs = perm_matrices(disc, group.generators(config))
    orbits = g_orbits_and_stabilizers(E, gens, invs, orders)
    g_order = group.order(config)
    classes = []
    for orb in orbits:
        data = overlattice_data(disc, orb.rep)
        qG = data.form.negate()
        genus = GenusSymbol(2, 18 - r_phi, qG)
        if not genus_nonempty(genus):
            continue
        gbar = gbar_image(data, orb.stabilizer, orders)
        try:
            gbar_order = len(group_closure(qG, gbar))
        except CapacityError:
            gbar_order = None
        head = dict(key=_orbit_key(orb.rep), orbit_size=orb.size, stab_order=g_order // orb.size,
                    gbar_order=gbar_order, K=orb.rep)
        if r_phi == 18:
            classes.append(_definite_class(head, qG, gbar, genus))
        else:
            classes.append(_mm_class(head, qG, gbar, genus, retries, nu0))
    return ComponentReport(str(config), tor, group, classes)


def _definite_class(head: dict, qG: FQF, gbar, genus: GenusSymbol) -> ClassResult:
    forms = definite_genus_representatives(genus)
    rc = []
    total = conj = 0
    for f in forms:
        dT = discriminant(f.lattice())
        ot = []
        for h in definite_isometry_group(f):
            d = h[0][0] * h[1][1] - h[0][1] * h[1][0]
            ot.append((dT.action(h), d))
        res: DefiniteOrbits = definite_orbits(qG, dT.form, gbar, ot)
        rc.append([res.r, res.c])
        total += res.total
        conj += res.conj_total
    return ClassResult(branch="definite", count=total, conj_count=conj, forms=forms, rc=rc, **head)


def _mm_class(head: dict, qG: FQF, gbar, genus: GenusSymbol, retries: int, nu0: Optional[int]) -> ClassResult:
    r = genus.rank
    d = genus.det
    sharps = {p: sigma_sharp_for(r, d, qG.p_part(p), p) for p in qG.primes}
    cg = mm_components(qG, sharps, gbar, r, d, retries, nu0)
    return ClassResult(branch="mm", count=cg.count, conj_count=cg.conj_count, dim=cg.dim,
                       conj_dim=cg.conj_dim, **head)
