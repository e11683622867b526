import random

import pytest
from hypothesis import given, settings, strategies as st

from odoforge.extension import (
    PENDING,
    FiberMismatch,
    Found,
    Free,
    Marker,
    NotFound,
    OdometerSystem,
    PartitionViolation,
    ToeplitzSystem,
    bounded_minimality_search,
    clopen_code,
    fiber_agreement,
    fiber_product,
    jpartition_equivariance_check,
    layout_partition,
    one_one_check,
    phi_approx,
    phi_equivariance_check,
    phi_stage,
    sample_extension_window,
    stage_invariance_check,
    symbol_partition,
    toeplitz_samples,
)
from odoforge.group_core import ChainError
from odoforge.odometer import basepoint, orbit_point
from odoforge.toeplitz import HOLE, parity_marking, translate


def ints(chain, lo, hi):
    return [chain.word(g) for g in range(lo, hi + 1)]


@pytest.fixture(scope="module")
def dy_odo(dyadic_tower):
    return OdometerSystem(dyadic_tower.truncate(6))


@pytest.fixture(scope="module")
def dy_toe(dyadic_tower, dyadic):
    return ToeplitzSystem(dyadic_tower.truncate(6), parity_marking(6), window=dyadic.ball(1))


@pytest.fixture(scope="module")
def tree_toe(tree_tower):
    return ToeplitzSystem(tree_tower.truncate(5), parity_marking(5), window=tree_tower.chain.ball(1))


def test_phi_stage_two_on_ruler(dy_odo, dyadic):
    w = ints(dyadic, 0, 7)
    phi = phi_stage(dy_odo, dy_odo.basepoint(), 2, w)
    reps = {g.payload[0]: (v.rep.payload[0], v.stage) for g, v in phi.items() if isinstance(v, Marker)}
    assert reps == {0: (0, 1), 2: (0, 1), 4: (0, 1), 6: (0, 1), 1: (1, 2), 5: (1, 2)}
    free = [g.payload[0] for g, v in phi.items() if isinstance(v, Free)]
    assert free == [3, 7]
    # a free cell carries the translate g^{-1} y_0, which sits over tau(-g)
    assert phi[dyadic.word(3)].base == orbit_point(dyadic, dyadic.word(-3), 6).cells


def test_phi_approx_marks_pending(dy_odo, dyadic):
    phi = phi_approx(dy_odo, dy_odo.basepoint(), 2, ints(dyadic, 0, 7))
    assert [g.payload[0] for g, v in phi.items() if v is PENDING] == [3, 7]
    with pytest.raises(ChainError):
        phi_approx(dy_odo, dy_odo.basepoint(), 9, ints(dyadic, 0, 1))


def test_phi_at_full_depth_has_free_cells_only_on_holes(dy_toe, dyadic):
    w = ints(dyadic, -8, 8)
    phi = phi_stage(dy_toe, dy_toe.basepoint(), 6, w)
    x = dy_toe.view(dy_toe.basepoint(), w)
    for g, v in phi.items():
        assert isinstance(v, Free) == (x.value(g) is HOLE)


@pytest.mark.parametrize("sysname", ["dy_odo", "dy_toe", "tree_toe"])
def test_phi_equivariance_and_fiber_coordinates(request, sysname):
    sys_ = request.getfixturevalue(sysname)
    chain = sys_.chain
    rng = random.Random(7)
    window = chain.ball(3 if chain.kind == "zd" else 2)
    for _ in range(100):
        y = sys_.act(chain.random_word(rng, 10), sys_.basepoint())
        h = chain.random_word(rng, 5)
        assert phi_equivariance_check(sys_, y, h, rng.randint(0, sys_.depth), window) == []
        assert one_one_check(sys_, y, h, rng.randint(1, sys_.depth)) is None


def test_jpartition_equivariance(tree_tower):
    chain = tree_tower.chain
    rng = random.Random(3)
    for _ in range(100):
        z = orbit_point(chain, chain.random_word(rng, 10), 6)
        assert jpartition_equivariance_check(tree_tower, z, chain.random_word(rng, 5), chain.ball(2)) == []


def test_stage_invariance(dyadic_tower, tree_tower):
    for t in (dyadic_tower, tree_tower):
        chain = t.chain
        assert stage_invariance_check(t, basepoint(chain, 5), chain.ball(8 if chain.kind == "zd" else 2)) == []


@pytest.mark.parametrize("sysname", ["dy_odo", "dy_toe", "tree_toe"])
def test_fiber_agreement_over_D5(request, sysname):
    sys_ = request.getfixturevalue(sysname)
    chain = sys_.chain
    window = chain.ball(3 if chain.kind == "zd" else 1)
    samples = sample_extension_window(sys_, sys_.tower.levels[5], window)
    assert len(samples) == len(sys_.tower.levels[5])
    for level in range(1, 6):
        rep = fiber_agreement(sys_, samples, window, level)
        assert rep.ok, rep.violations[:3]
        assert rep.comparisons > 0


def test_fiber_agreement_detects_tampering(dy_odo, dyadic):
    window = ints(dyadic, 0, 3)
    samples = sample_extension_window(dy_odo, dy_odo.tower.levels[3], window)
    s = samples[0]
    bad = type(s)(s.base, (Marker(dyadic.word(1), 1),) + s.phi[1:])
    assert not fiber_agreement(dy_odo, [bad] + samples[1:], window, 3).ok


def test_minimality_search(dy_odo, dy_toe, dyadic):
    y = dy_odo.act(dyadic.word(5), dy_odo.basepoint())
    res = bounded_minimality_search(dy_odo, y, 4, 20)
    assert isinstance(res, Found) and res.witness.payload[0] % 16 == (-5) % 16
    res = bounded_minimality_search(dy_toe, dyadic.word(11), 3, 20)
    assert isinstance(res, Found) and (res.witness.payload[0] + 11) % 8 == 0
    assert isinstance(bounded_minimality_search(dy_odo, y, 4, 3), NotFound)


def test_identity_coding(dy_toe, tree_toe, dyadic):
    for sys_ in (dy_toe, tree_toe):
        chain = sys_.chain
        x = sys_.view(chain.identity(), chain.ball(2))
        assert clopen_code(x, symbol_partition(chain, x.alphabet)) == x.values


def test_layout_coding_reads_the_coset(dy_toe, dyadic):
    x = dy_toe.view(dyadic.identity(), ints(dyadic, 0, 15))
    part = layout_partition(x, 1, ints(dyadic, -4, 4))
    code = clopen_code(x, part)
    # g^{-1} x lies in h_c B_1 with c the level-1 cell of g^{-1}
    assert list(code) == [(-g) % 2 for g in range(16)]


def test_small_support_is_not_a_partition(tree_toe):
    chain = tree_toe.chain
    x = tree_toe.view(chain.identity(), chain.ball(2))
    with pytest.raises(PartitionViolation):
        clopen_code(x, layout_partition(x, 3, chain.ball(1)))


def test_fiber_product_diagonal(dy_toe, tree_toe):
    for sys_ in (dy_toe, tree_toe):
        a = toeplitz_samples(sys_, sys_.tower.levels[4])
        pairs = fiber_product(a, a, 4, unique=True)
        assert len(pairs) == len(a) and all(p == q for p, q in pairs)
        with pytest.raises(FiberMismatch):
            fiber_product(a[:1], a[1:], 4)


@settings(max_examples=30, deadline=None)
@given(h=st.integers(-300, 300))
def test_coding_commutes_with_shifts(dy_toe, dyadic, h):
    x = dy_toe.view(dyadic.identity(), ints(dyadic, -3, 3))
    part = symbol_partition(dyadic, x.alphabet)
    hw = dyadic.word(h)
    lhs = clopen_code(translate(x, hw), part)
    rhs = clopen_code(x, part, [dyadic.mul(dyadic.inv(hw), g) for g in x.cells])
    assert lhs == rhs
