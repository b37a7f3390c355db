import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stripack.core import Instance, Item, area_lower_bound, validate_packing
from stripack.reduction import ThreePartitionInstance, build_instance
from stripack.solvers import (
    LimitExceeded,
    SolverConfig,
    TooLarge,
    brute_force_3partition,
    solve,
    solve_bottom_left,
    solve_exact,
    solve_ffdh,
    solve_nfdh,
    stacking_lower_bound,
)

from oracles import brute_force_min_height

HEURISTICS = (solve_nfdh, solve_ffdh, solve_bottom_left)


def make(W, dims):
    return Instance(W, tuple(Item(k + 1, w, h) for k, (w, h) in enumerate(dims)))


@pytest.mark.parametrize(
    "W,dims,height",
    [
        (2, [(1, 1), (1, 1), (2, 1)], 2),
        (4, [(3, 2), (2, 2), (2, 1), (1, 1)], 4),
        (1, [(1, 1), (1, 2), (1, 3), (1, 4)], 10),
    ],
)
def test_exact_examples(W, dims, height):
    inst = make(W, dims)
    pk = solve_exact(inst)
    assert validate_packing(inst, pk).ok
    assert pk.height == height


def test_shelf_heuristics_example():
    inst = make(10, [(5, 4), (5, 3), (6, 2)])
    for algo in (solve_nfdh, solve_ffdh):
        pk = algo(inst)
        assert validate_packing(inst, pk).ok and pk.height == 6


def test_single_item_everywhere():
    inst = make(7, [(3, 5)])
    for algo in HEURISTICS + (solve_exact,):
        assert algo(inst).height == 5


def test_ffdh_reuses_lower_shelf_where_nfdh_cannot():
    inst = make(10, [(5, 4), (8, 3), (5, 2)])
    assert solve_nfdh(inst).height == 9
    assert solve_ffdh(inst).height == 7


def test_bottom_left_keeps_input_order():
    inst = make(4, [(2, 1), (4, 1), (2, 3)])
    pk = solve_bottom_left(inst)
    pos = {p.item_id: (p.x, p.y) for p in pk.placements}
    assert pos == {1: (0, 0), 2: (0, 1), 3: (0, 2)}
    assert validate_packing(inst, pk).ok


def test_item_cap_and_reduction_sized_refusal():
    inst, _ = build_instance(ThreePartitionInstance((-1, 0, 1), 1))
    with pytest.raises(TooLarge):
        solve_exact(inst)


def test_limit_exceeded_carries_valid_incumbent():
    inst = make(20, [(7, 5), (6, 9), (5, 7), (9, 3), (3, 8), (11, 2), (4, 6), (8, 4)])
    with pytest.raises(LimitExceeded) as info:
        solve_exact(inst, SolverConfig(node_limit=1))
    exc = info.value
    assert exc.proven_optimal is False
    assert validate_packing(inst, exc.incumbent).ok


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig("simplex")
    with pytest.raises(ValueError):
        SolverConfig(time_limit_ms=0)


def test_determinism():
    inst = make(12, [(5, 3), (7, 2), (4, 4), (3, 3), (6, 1)])
    for algo in ("exact", "nfdh", "ffdh", "bottom_left"):
        cfg = SolverConfig(algo)
        assert solve(inst, cfg) == solve(inst, cfg)


def test_brute_force_3partition_examples():
    assert brute_force_3partition(ThreePartitionInstance((-1, 0, 1), 1)).triples == ((1, 2, 3),)
    assert brute_force_3partition(ThreePartitionInstance((1, 1, 1, -1, -1, -1), 2)) is None
    assert brute_force_3partition(ThreePartitionInstance((0,) * 6, 2)) is not None


tiny = st.integers(1, 6).flatmap(
    lambda W: st.tuples(
        st.just(W),
        st.lists(st.tuples(st.integers(1, W), st.integers(1, 4)), min_size=1, max_size=5),
    )
)


@given(tiny)
@settings(max_examples=150, deadline=None)
def test_exact_matches_brute_force_oracle(case):
    W, dims = case
    inst = make(W, dims)
    pk = solve_exact(inst)
    assert validate_packing(inst, pk).ok
    assert pk.height == brute_force_min_height(W, dims)
    assert pk.height >= max(area_lower_bound(inst), stacking_lower_bound(inst))


small = st.integers(2, 12).flatmap(
    lambda W: st.tuples(
        st.just(W),
        st.lists(st.tuples(st.integers(1, W), st.integers(1, 6)), min_size=1, max_size=8),
    )
)


@given(small)
@settings(max_examples=120, deadline=None)
def test_heuristics_never_beat_exact(case):
    W, dims = case
    inst = make(W, dims)
    try:
        best = solve_exact(inst, SolverConfig(node_limit=200_000)).height
    except LimitExceeded:
        return
    for algo in HEURISTICS:
        pk = algo(inst)
        assert validate_packing(inst, pk).ok
        assert pk.height >= best


@given(st.integers(1, 8), st.lists(st.integers(1, 5), min_size=1, max_size=6))
@settings(max_examples=60, deadline=None)
def test_area_tight_cases_hit_the_bound(W, heights):
    # full-width items: the area bound is exact
    inst = make(W, [(W, h) for h in heights])
    assert solve_exact(inst).height == area_lower_bound(inst) == sum(heights)
