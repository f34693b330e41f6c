from __future__ import annotations

import json

import pytest

from k3mod.exact import DomainError
from k3mod.fqf import group_closure
from k3mod.moduli import (
    MarkingGroupSpec,
    compute_components,
    enumerate_E,
    g_orbits_and_stabilizers,
    parse_torsion,
    perm_matrices,
    torsion_str,
)
from k3mod.zlattice import AdeConfiguration, BinaryForm


def _act(K, A, orders):
    return frozenset(
        tuple(sum(x[i] * A[i][j] for i in range(len(x))) % orders[j] for j in range(len(orders))) for x in K
    )


def test_parse_torsion():
    assert parse_torsion("[1]") == ()
    assert parse_torsion("[2]") == (2,)
    assert parse_torsion("[3,3]") == (3, 3)
    assert parse_torsion("[2,3]") == (6,)
    assert torsion_str(()) == "[1]" and torsion_str((2, 4)) == "[2,4]"
    with pytest.raises(DomainError):
        parse_torsion("[]")


def test_marking_group_spec():
    config = AdeConfiguration.parse("2A2")
    assert MarkingGroupSpec.parse("aut").order(config) == 8
    assert MarkingGroupSpec.parse("trivial").generators(config) == []
    swap = MarkingGroupSpec.parse("2 3 0 1")
    assert swap.kind == "explicit" and swap.order(config) == 2
    assert swap.render() == [[2, 3, 0, 1]]
    with pytest.raises(DomainError):
        MarkingGroupSpec.parse("0 2 1 3").generators(config)
    with pytest.raises(DomainError):
        MarkingGroupSpec.parse("0 0 1 2").generators(config)


@pytest.mark.parametrize(
    "phi, torsion",
    [("A9+A5+A3+A1", "[2]"), ("E7+D6+A3+A1", "[2]"), ("A5+A3+6A1", "[2]"), ("2A5+4A2", "[3,3]")],
)
def test_orbits_and_stabilizers_vs_whole_group(phi, torsion):
    config = AdeConfiguration.parse(phi)
    disc = config.discriminant()
    orders = disc.form.orders
    E = enumerate_E(config, parse_torsion(torsion), disc)
    assert E
    gens, invs = perm_matrices(disc, config.aut_generators())
    group = group_closure(disc.form, gens)
    orbits = g_orbits_and_stabilizers(E, gens, invs, orders)
    assert sum(o.size for o in orbits) == len(E)
    covered = set()
    for orb in orbits:
        brute_orbit = {_act(orb.rep, g, orders) for g in group}
        assert len(brute_orbit) == orb.size
        assert not covered & brute_orbit
        covered |= brute_orbit
        brute_stab = {g for g in group if _act(orb.rep, g, orders) == orb.rep}
        assert set(group_closure(disc.form, orb.stabilizer)) == brute_stab
        assert len(brute_stab) * orb.size == len(group)
    assert covered == set(E)


def test_seven_a2_single_orbit():
    rep = compute_components("7A2", "[3]")
    assert len(rep.classes) == 1
    cls = rep.classes[0]
    assert cls.orbit_size == 224
    assert cls.stab_order == 2880
    assert rep.total == 1 and rep.total_mod_conj == 1


def test_seven_a2_trivial_marking_per_class():
    rep = compute_components("7A2", "[3]", MarkingGroupSpec("trivial"))
    assert len(rep.classes) == 224
    assert all(c.count == 2 and c.conj_count == 1 for c in rep.classes)


@pytest.mark.parametrize(
    "phi, aut_total, trivial_total, trivial_conj",
    [("4A4", 1, 2, 2), ("2D4+4A2", 1, 4, 2)],
)
def test_marking_group_examples(phi, aut_total, trivial_total, trivial_conj):
    assert compute_components(phi).total == aut_total
    rep = compute_components(phi, "[1]", MarkingGroupSpec("trivial"))
    assert (rep.total, rep.total_mod_conj) == (trivial_total, trivial_conj)


@pytest.mark.parametrize("phi, torsion", [("E7+2A5", "[1]"), ("3A5+A1", "[1]"), ("4A4", "[1]")])
def test_monotone_in_marking_group(phi, torsion):
    full = compute_components(phi, torsion)
    triv = compute_components(phi, torsion, MarkingGroupSpec("trivial"))
    assert triv.total >= full.total
    assert triv.total_mod_conj >= full.total_mod_conj


def test_extremal_row_uses_definite_branch():
    rep = compute_components("E8+A9+A1")
    assert [c.branch for c in rep.classes] == ["definite"]
    assert rep.classes[0].forms == [BinaryForm(2, 0, 10)]
    assert rep.classes[0].rc == [[2, 0]]
    assert rep.total == 2 and rep.total_mod_conj == 2


def test_two_algebraic_classes():
    rep = compute_components("A9+A5+A3+A1", "[2]")
    assert len(rep.classes) == 2
    for c in rep.classes:
        assert c.forms == [BinaryForm(10, 0, 12)] and c.rc == [[1, 0]]


def test_non_extremal_row_uses_mm_branch():
    rep = compute_components("E7+D6+A3+A1", "[2]")
    assert {c.branch for c in rep.classes} == {"mm"}
    assert rep.counts() == [1, 1]


def test_unrealized_type_reports_no_classes():
    rep = compute_components("A1", "[2]")
    assert not rep.realized and rep.classes == [] and rep.total == 0
    assert "note" in rep.as_json()


def test_rank_above_eighteen_is_rejected():
    with pytest.raises(DomainError):
        compute_components("E8+E8+A3")


def test_json_report_is_stable():
    a = json.dumps(compute_components("E7+2A5").as_json(), sort_keys=True)
    b = json.dumps(compute_components("E7+2A5").as_json(), sort_keys=True)
    assert a == b
    data = json.loads(a)
    assert data["total"] == 2 and data["total_mod_conj"] == 1
    cls = data["classes"][0]
    assert cls["branch"] == "mm" and cls["count"] == 2 and cls["conj_count"] == 1
    assert set(cls) >= {"key", "orbit_size", "stab_order", "gbar_order", "dim", "conj_dim"}
