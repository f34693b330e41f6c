from __future__ import annotations

from collections import Counter

import pytest

from k3mod.moduli import enumerate_E, parse_torsion
from k3mod.torsion import fiber_marks, narrowness_report, render_signature, torsion_classes
from k3mod.zlattice import AdeConfiguration, cartan_gram


def test_marks_of_type_a_are_all_one():
    for n in range(1, 12):
        assert fiber_marks("A", n).marks == (1,) * n


def test_d4_marks_have_two_on_the_center():
    fd = fiber_marks("D", 4)
    assert sorted(fd.marks) == [1, 1, 1, 2]
    G = cartan_gram("D", 4)
    center = next(i for i in range(4) if sum(1 for j in range(4) if j != i and G[i][j]) == 3)
    assert fd.marks[center] == 2


def test_e8_marks():
    assert sorted(fiber_marks("E", 8).marks) == [2, 2, 3, 3, 4, 4, 5, 6]
    assert sum(fiber_marks("E", 8).marks) == 29


@pytest.mark.parametrize("letter, n", [("A", 1), ("A", 7), ("D", 5), ("D", 8), ("E", 6), ("E", 7), ("E", 8)])
def test_marks_complete_the_affine_diagram(letter, n):
    fd = fiber_marks(letter, n)
    fd.check()
    G = cartan_gram(letter, n)
    # the extra node is again a root and attaches to the diagram by single edges
    pair = fd.theta0_pairings()
    assert sum(fd.marks[i] * G[i][j] * fd.marks[j] for i in range(n) for j in range(n)) == -2
    assert set(pair) <= {0, 1, 2}
    # the number of mark-one nodes plus the zero component equals the discriminant order
    assert len(fd.simple_nodes()) + 1 == AdeConfiguration.parse(f"{letter}{n}").discriminant().form.size


def test_trivial_torsion_has_only_the_zero_section():
    config = AdeConfiguration.parse("E7+2A5")
    disc = config.discriminant()
    (K,) = enumerate_E(config, (), disc)
    rep = torsion_classes(config, disc, K)
    assert len(rep.classes) == 1 and rep.classes[0].is_zero
    assert rep.signature() == ()
    (entry,) = narrowness_report("E7+2A5")
    assert render_signature(entry.signature) == "zero section only"


def _oracle_signature(config, disc, K):
    """Narrow at a fiber iff the lifted glue vector is integral on that fiber."""
    types = sorted(set(config.components))
    sig = []
    for x in K:
        if not any(x):
            continue
        u = disc.lift(x)
        integral = [
            all(v.denominator == 1 for v in u[o: o + n]) for (_, n), o in zip(config.components, config.offsets)
        ]
        c = Counter(comp for comp, ok in zip(config.components, integral) if ok)
        sig.append(tuple((f"{l}{n}", c[(l, n)]) for l, n in types))
    return tuple(sorted(sig))


@pytest.mark.parametrize("phi, torsion", [("A9+A5+A3+A1", "[2]"), ("A5+A3+6A1", "[2]"), ("2A5+4A2", "[3,3]")])
def test_signature_matches_lifted_glue(phi, torsion):
    config = AdeConfiguration.parse(phi)
    disc = config.discriminant()
    for entry in narrowness_report(phi, torsion):
        assert len(entry.report.classes) == len(entry.K)
        assert entry.signature == _oracle_signature(config, disc, entry.K)


def test_two_narrowness_patterns_on_a9_a5_a3_a1():
    sigs = [e.signature for e in narrowness_report("A9+A5+A3+A1", "[2]")]
    assert sorted(sigs) == sorted(
        [
            ((("A1", 0), ("A3", 0), ("A5", 1), ("A9", 0)),),
            ((("A1", 1), ("A3", 1), ("A5", 0), ("A9", 0)),),
        ]
    )


def test_three_narrowness_patterns_on_a5_a3_6a1():
    entries = narrowness_report("A5+A3+6A1", "[2]")
    got = {e.signature: e.orbit_size for e in entries}
    assert got == {
        ((("A1", 0), ("A3", 0), ("A5", 1)),): 1,
        ((("A1", 1), ("A3", 1), ("A5", 0)),): 6,
        ((("A1", 3), ("A3", 0), ("A5", 0)),): 20,
    }


def test_render_signature():
    sig = ((("A1", 1), ("A3", 1), ("A5", 0)),)
    assert render_signature(sig) == "narrow {A1:1, A3:1, A5:0}"
