from __future__ import annotations

import random
from fractions import Fraction

import pytest

from k3mod.exact import GammaElement, square_class
from k3mod.fqf import FQF, Block, blocks_form, find_isomorphism, fqf_automorphisms
from k3mod.mmgroup import (
    GammaDVector,
    ambient_dim,
    beta,
    beta_elements,
    component_group,
    definite_orbits,
    gamma_of,
    identity_vector,
    mm_components,
    sharp_vectors,
)
from k3mod.moduli import (
    MarkingGroupSpec,
    enumerate_E,
    g_orbits_and_stabilizers,
    gbar_image,
    overlattice_data,
    parse_torsion,
    perm_matrices,
)
from k3mod.padic import sigma_sharp_for
from k3mod.zlattice import (
    AdeConfiguration,
    BinaryForm,
    GenusSymbol,
    definite_genus_representatives,
    definite_isometry_group,
    discriminant,
)


def test_beta_examples():
    b = beta((2, 3), -1, 1, -1)
    assert all(g.det == -1 and g.spin.is_trivial() for g in b.parts) and b.sign == -1
    b = beta((2,), 1, -1, -1)
    assert b.parts == (GammaElement(1, square_class(2, 7)),) and b.sign == -1
    b = beta((2, 3), 1, 3, 1)
    assert b.parts[0].spin == square_class(2, 3)
    assert b.parts[1].spin.val == 1
    assert b.sign == 1
    assert len(beta_elements((2, 3, 5))) == 5
    assert ambient_dim((2, 3)) == 4 + 3 + 1


def test_gamma_of_examples():
    q = FQF.make([3], [[Fraction(4, 3)]])
    assert gamma_of(q, [[1]], 1, 3) == identity_vector((3,))
    assert gamma_of(q, [[2]], 1, 3).parts == (GammaElement(-1, square_class(3, Fraction(3, 8))),)
    u = blocks_form([Block(2, 1, "u")])
    assert gamma_of(u, [[0, 1], [1, 0]], 2, -4).parts == (GammaElement(-1, square_class(2, -2)),)


def test_unimodular_edge_case_has_one_component():
    cg = component_group([], [], beta_elements(()), ())
    assert cg.count == 1 and cg.conj_count == 1


def _mm_inputs(phi: str, torsion: str = "[1]"):
    config = AdeConfiguration.parse(phi)
    disc = config.discriminant()
    E = enumerate_E(config, parse_torsion(torsion), disc)
    gens, invs = perm_matrices(disc, MarkingGroupSpec("aut").generators(config))
    out = []
    for orb in g_orbits_and_stabilizers(E, gens, invs, disc.form.orders):
        data = overlattice_data(disc, orb.rep)
        qG = data.form.negate()
        g = GenusSymbol(2, 18 - config.rank, qG)
        sharps = {p: sigma_sharp_for(g.rank, g.det, qG.p_part(p), p) for p in qG.primes}
        out.append((qG, sharps, gbar_image(data, orb.stabilizer, disc.form.orders), g.rank, g.det))
    return out


@pytest.mark.parametrize("phi, torsion, counts", [("E7+2A5", "[1]", [2]), ("E7+D6+A3+A1", "[2]", [1, 1])])
def test_component_group_counts(phi, torsion, counts):
    got = []
    for qG, sharps, gbar, r, d in _mm_inputs(phi, torsion):
        cg = mm_components(qG, sharps, gbar, r, d)
        got.append(cg.count)
        if phi == "E7+2A5":
            assert cg.conj_count == 1
    assert sorted(got) == sorted(counts)


def test_component_group_is_order_independent():
    (qG, sharps, gbar, r, d), = _mm_inputs("E7+2A5")
    primes = tuple(qG.primes)
    sv = sharp_vectors(primes, sharps)
    bv = beta_elements(primes)
    gv = [gamma_of(qG, g, r, d) for g in gbar]
    ref = component_group(sv, gv, bv, primes)
    rng = random.Random(5)
    for _ in range(5):
        a, b, c = sv[:], gv[:], bv[:]
        rng.shuffle(a)
        rng.shuffle(b)
        rng.shuffle(c)
        cg = component_group(a, b, c, primes)
        assert (cg.dim, cg.conj_dim) == (ref.dim, ref.conj_dim)
    # reorder the primes themselves
    rev = tuple(reversed(primes))
    perm = [primes.index(p) for p in rev]

    def reorder(v: GammaDVector) -> GammaDVector:
        return GammaDVector(rev, tuple(v.parts[i] for i in perm), v.sign)

    sharps_rev = {p: sharps[p] for p in rev}
    cg = component_group(sharp_vectors(rev, sharps_rev), [reorder(v) for v in gv], beta_elements(rev), rev)
    assert (cg.dim, cg.conj_dim) == (ref.dim, ref.conj_dim)
    # shifting a gamma generator by an element of K changes nothing
    if gv:
        k = bv[0]
        shifted = GammaDVector(primes, tuple(x * y for x, y in zip(gv[0].parts, k.parts)), gv[0].sign * k.sign)
        cg = component_group(sv, [shifted] + gv[1:], bv, primes)
        assert cg.dim == ref.dim


def test_kernel_contains_the_shortcut_kernel():
    for qG, sharps, gbar, r, d in _mm_inputs("E7+D6+A3+A1", "[2]"):
        primes = tuple(qG.primes)
        sv = sharp_vectors(primes, sharps)
        bv = beta_elements(primes)
        base = component_group(sv, [], bv, primes)
        full = mm_components(qG, sharps, gbar, r, d)
        assert all(full.kernel.contains(v) for v in base.kernel.basis())
        if base.dim == 0:
            assert not full.used_gamma and full.count == 1


# ---------------------------------------------------------------------------
# positive definite branch
# ---------------------------------------------------------------------------


def _definite_inputs(phi: str, torsion: str = "[1]"):
    config = AdeConfiguration.parse(phi)
    assert config.rank == 18
    disc = config.discriminant()
    E = enumerate_E(config, parse_torsion(torsion), disc)
    gens, invs = perm_matrices(disc, MarkingGroupSpec("aut").generators(config))
    for orb in g_orbits_and_stabilizers(E, gens, invs, disc.form.orders):
        data = overlattice_data(disc, orb.rep)
        qG = data.form.negate()
        gbar = gbar_image(data, orb.stabilizer, disc.form.orders)
        for f in definite_genus_representatives(GenusSymbol(2, 0, qG)):
            dT = discriminant(f.lattice())
            ot = []
            for h in definite_isometry_group(f):
                ot.append((dT.action(h), h[0][0] * h[1][1] - h[0][1] * h[1][0]))
            yield f, qG, dT.form, gbar, ot


@pytest.mark.parametrize(
    "phi, torsion, expected",
    [
        ("E8+A9+A1", "[1]", {BinaryForm(2, 0, 10): (2, 0)}),
        ("A17+A1", "[1]", {BinaryForm(4, 2, 10): (0, 2)}),
        ("E7+A10+A1", "[1]", {BinaryForm(2, 0, 22): (1, 0), BinaryForm(6, 2, 8): (0, 2)}),
    ],
)
def test_definite_orbits(phi, torsion, expected):
    got = {}
    for f, qG, qT, gbar, ot in _definite_inputs(phi, torsion):
        res = definite_orbits(qG, qT, gbar, ot)
        got[f] = (res.r, res.c)
        assert res.c % 2 == 0
        assert sum(res.orbit_sizes) == 2 * fqf_automorphisms(qT).order
        # a second reference isomorphism gives the same counts
        alpha0 = find_isomorphism(qG, qT)
        n = len(qT.orders)
        ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        for h in [e for e in fqf_automorphisms(qT).elements() if e != ident][:1]:
            alt = [[sum(r[k] * h[k][j] for k in range(n)) % qT.orders[j] for j in range(n)] for r in alpha0]
            res2 = definite_orbits(qG, qT, gbar, ot, alpha0=alt)
            assert (res2.r, res2.c) == (res.r, res.c)
    assert got == expected


def test_definite_orbits_rejects_non_isomorphic_forms():
    a = FQF.make([3], [[Fraction(4, 3)]])
    b = FQF.make([3], [[Fraction(2, 3)]])
    with pytest.raises(ValueError):
        definite_orbits(a, b, [], [])
