import json
from fractions import Fraction

import pytest

from odoforge.tower import (
    DepthExhausted,
    PlanMismatch,
    ThinningPlan,
    TransversalTower,
    build_tower,
    greedy_plan,
    thin_for_P7,
    thinned,
    tower_from_json,
    tower_to_json,
    valid_plans,
    verify_tower,
    z0_bound,
    z0_tail,
)


def test_dyadic_levels_are_residue_ranges(dyadic_tower, dyadic):
    # oracle: D_n = {0, ..., 2^n - 1}
    for n in range(0, 8):
        assert sorted(g.payload[0] for g in dyadic_tower.levels[n]) == list(range(2**n))


def test_z2_levels_are_boxes(z2_tower):
    for n in range(0, 4):
        assert sorted(g.payload for g in z2_tower.levels[n]) == [
            (x, y) for x in range(2**n) for y in range(2**n)
        ]


@pytest.mark.parametrize("name", ["dyadic", "z2", "tree", "table3"])
def test_fixture_towers_verify(towers, name):
    t = towers[name]
    t.all_witnesses()
    rep = verify_tower(t)
    assert rep.passed, rep.to_json()
    assert t.sizes() == [t.chain.index(n) for n in range(t.depth + 1)]


def test_coverage_radius(dyadic_tower, tree_tower):
    # D_N holds only nonnegative residues, so -1 is missing and the radius is 0
    assert verify_tower(dyadic_tower).coverage_radius == 0
    assert verify_tower(tree_tower).coverage_radius >= 0


def _corrupt(t, n, old, new):
    chain = t.chain
    levels = [list(l) for l in t.levels]
    levels[n] = [new if w == old else w for w in levels[n]]
    return TransversalTower(chain, [tuple(l) for l in levels])


def test_corrupted_tower_names_failing_property(dyadic_tower, dyadic):
    t = dyadic_tower.truncate(3)
    bad = _corrupt(t, 3, dyadic.word(5), dyadic.word(13))
    rep = verify_tower(bad)
    assert rep.get("P2").passed  # 13 and 5 share a coset mod 8
    assert not rep.get("P4").passed
    assert rep.get("P4").counterexample == "5"
    two = _corrupt(t, 3, dyadic.word(5), dyadic.word(6))
    assert not verify_tower(two).get("P2").passed
    nest = _corrupt(t, 2, dyadic.word(1), dyadic.word(5))
    assert not verify_tower(nest).get("P1").passed


def test_witnesses_factor(tree_tower):
    chain = tree_tower.chain
    for n, j in [(3, 1), (5, 2), (6, 5)]:
        for w in tree_tower.levels[n]:
            v, d = tree_tower.witness(n, j, w)
            assert chain.mul(v, d) == w
            assert chain.in_subgroup(j, v) and d in tree_tower.levels[j]


def test_tower_json_roundtrip(tree_tower):
    t = tree_tower.truncate(5)
    data = json.loads(json.dumps(tower_to_json(t)))
    back = tower_from_json(tree_tower.chain, data)
    assert back.levels == t.levels
    assert verify_tower(back).passed


def test_greedy_plans_match_derived_sequences(dyadic_tower, z2_tower, tree_tower, table3_tower):
    # oracle: for sizes 2^n the step condition is n_i > n_{i-1} + i + 1
    assert thin_for_P7(dyadic_tower).levels == (3, 7, 12)
    # for sizes 4^n it is 2 n_i > 2 n_{i-1} + i + 1
    assert thin_for_P7(z2_tower).levels == (2, 4, 7)
    assert thin_for_P7(tree_tower).levels == (3, 7)
    assert thin_for_P7(table3_tower).levels == (3,)
    plan = thin_for_P7(dyadic_tower)
    assert plan.ratios == (Fraction(1, 8), Fraction(1, 16), Fraction(1, 32))
    assert all(r < Fraction(1, 2 ** (i + 2)) for i, r in enumerate(plan.ratios))


def test_z0_values(dyadic_tower, z2_tower):
    plan = thin_for_P7(dyadic_tower)
    assert z0_bound(dyadic_tower, plan) == Fraction(7, 32)
    assert z0_tail(plan) == Fraction(1, 16)
    assert z0_bound(z2_tower, thin_for_P7(z2_tower)) == Fraction(9, 64)


@pytest.mark.parametrize("name", ["dyadic", "z2", "tree", "table3"])
def test_every_valid_plan_has_z0_below_half(towers, name):
    t = towers[name]
    plans = valid_plans(t.sizes())
    assert plans
    for p in plans:
        assert z0_bound(t, p) + z0_tail(p) <= Fraction(1, 2)


def test_plan_validation():
    with pytest.raises(PlanMismatch):
        ThinningPlan((1,), (1, 2))  # 1/2 is not < 1/4
    with pytest.raises(PlanMismatch):
        ThinningPlan((3, 2), (1, 8, 4))
    with pytest.raises(DepthExhausted) as exc:
        greedy_plan([1, 2, 4, 8, 16], count=3)
    assert exc.value.failed_at == 2 and exc.value.achieved == 1


def test_thinned_tower_verifies(dyadic_tower):
    t = thinned(dyadic_tower, thin_for_P7(dyadic_tower))
    assert t.sizes() == [1, 8, 128, 4096]
    assert verify_tower(t).passed


def test_build_on_truncated_chain(tree):
    t = build_tower(tree.truncate(3))
    assert t.depth == 3 and verify_tower(t).passed


def test_tampered_witness_detected(dyadic_tower, dyadic):
    t = dyadic_tower.truncate(4)
    t.all_witnesses()
    wit = {k: dict(v) for k, v in t.witnesses.items()}
    w = dyadic.word(5)
    wit[(4, 2)][w] = (dyadic.word(4), dyadic.word(2))  # 4 + 2 != 5
    bad = TransversalTower(t.chain, t.levels, wit)
    res = verify_tower(bad).get("P4")
    assert not res.passed and "bad witness" in res.detail
    del wit[(4, 2)][w]
    assert "missing witness" in verify_tower(TransversalTower(t.chain, t.levels, wit)).get("P4").detail
