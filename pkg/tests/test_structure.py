from fractions import Fraction as F
from itertools import islice
from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stripack.core import Instance, Item, Packing, Placement, Rect, placed_rects, validate_packing
from stripack.solvers import solve_ffdh
from stripack.structure import (
    CLASSES,
    CapacityExceeded,
    DegenerateGrid,
    GridViolation,
    PartitionParams,
    build_level1_partition,
    choose_delta_mu,
    classify_items,
    crossing_rule_violations,
    delta_ladder,
    medium_band_area,
    opt_candidates,
    prepare_reference,
    relocate_crossing,
    round_heights,
)


def make(W, dims):
    return Instance(W, tuple(Item(k + 1, w, h) for k, (w, h) in enumerate(dims)))


def test_opt_candidates_examples():
    # lb = 10 from a single full-width item
    assert opt_candidates(make(1, [(1, 10)]), F(1, 2)) == [10, 15, 20]
    one = opt_candidates(make(4, [(1, 1)]), F(1, 4))
    assert one[0] == 1 and 2 in one
    assert opt_candidates(make(3, [(3, 7)]), F(1, 3))[0] == 7


@given(st.integers(1, 500), st.sampled_from([F(1, 3), F(1, 4), F(1, 10), F(1, 2)]))
def test_opt_candidates_cover_the_range(lb, eps):
    cands = opt_candidates(make(1, [(1, lb)]), eps)
    assert cands == sorted(set(cands))
    assert cands[0] == lb and cands[-1] == 2 * lb
    # consecutive guesses are at most a (1+eps) factor apart, up to rounding
    for lo, hi in zip(cands, cands[1:]):
        assert hi <= (1 + eps) * lo + 1


def test_delta_ladder_shape():
    ladder = list(islice(delta_ladder(F(1, 4)), 4))
    assert sum(1 for _ in zip(range(20), delta_ladder(F(1, 4)))) == 9
    assert ladder[0][0] == F(1, 4)
    for (d, m), (d2, _) in zip(ladder, ladder[1:]):
        assert m == d2 == (F(1, 4) * d) ** 3 / 10


def test_unit_squares_accept_first_rung():
    p = choose_delta_mu(make(100, [(1, 1)] * 100), F(1, 10), 100)
    assert p.delta == F(1, 10)
    assert p.mu <= (p.delta * p.epsilon) ** 3


def test_identical_items_find_an_empty_band():
    inst = make(1000, [(10, 10)] * 50)
    eps = F(1, 10)
    areas = [medium_band_area(inst, d, m, 1000) for d, m in islice(delta_ladder(eps), 3)]
    assert 0 in areas
    p = choose_delta_mu(inst, eps, 1000)
    assert medium_band_area(inst, p.delta, p.mu, 1000) <= eps * 1000 * 1000


def test_classification_example():
    # mu = 1/100 breaks the relocation invariant on mu, but the class
    # thresholds only read delta, mu and opt
    p = SimpleNamespace(delta=F(1, 10), mu=F(1, 100), opt=1000)
    inst = make(1000, [(200, 500), (50, 400), (5, 200), (300, 5), (5, 5), (50, 50), (100, 100)])
    cls = classify_items(inst, p)
    assert [cls[k] for k in range(1, 8)] == ["L", "T", "V", "H", "S", "M", "L"]
    assert classify_items(Instance(5, ()), p) == {}


def test_params_invariants():
    with pytest.raises(ValueError):
        PartitionParams(F(1, 2), F(1, 3), F(1, 10**6), 10)
    with pytest.raises(ValueError):
        PartitionParams(F(1, 3), F(1, 3), F(1, 3), 10)
    with pytest.raises(ValueError):
        PartitionParams(F(1, 3), F(1, 3), F(1, 100), 10)
    e, d = F(1, 3), F(1, 3)
    assert PartitionParams(e, d, (e * d) ** 3 / 10, 10).K == 405


def test_round_heights():
    e, d = F(1, 4), F(1, 5)
    p = PartitionParams(e, d, (e * d) ** 3 / 10, 200)
    inst = make(100, [(50, 250), (50, 253), (60, 1)])
    cls = {1: "L", 2: "T", 3: "H"}
    rounded, g = round_heights(inst, cls, p)
    assert g == 10
    assert [it.h for it in rounded.items] == [250, 260, 1]
    again, _ = round_heights(rounded, cls, p)
    assert again == rounded
    tiny = PartitionParams(e, d, (e * d) ** 3 / 10, 10)
    with pytest.raises(DegenerateGrid):
        round_heights(inst, cls, tiny)


@st.composite
def instances(draw):
    W = draw(st.sampled_from([12, 20, 24]))
    dims = draw(st.lists(st.tuples(st.integers(1, W), st.integers(1, 30)), min_size=1, max_size=12))
    return make(W, dims)


@given(instances(), st.sampled_from([F(1, 3), F(1, 4)]))
@settings(max_examples=100, deadline=None)
def test_classification_is_a_partition_and_rounding_is_monotone(inst, eps):
    opt = solve_ffdh(inst).height
    p = choose_delta_mu(inst, eps, opt)
    cls = classify_items(inst, p)
    assert set(cls) == {it.id for it in inst.items}
    assert set(cls.values()) <= set(CLASSES)
    if p.grid_y >= 1:
        rounded, _ = round_heights(inst, cls, p)
        for a, b in zip(inst.items, rounded.items):
            assert b.h >= a.h and b.h - a.h < p.grid_y


def test_single_large_item_partition():
    inst = make(12, [(12, 12)])
    e = d = F(1, 3)
    ref = Packing((Placement(1, 0, 0),), 12)
    prep = prepare_reference(inst, e, ref, d, (e * d) ** 3 / 10)
    part, crossing = build_level1_partition(prep.instance, prep.classification, prep.params, prep.packing)
    assert part.tiles()
    assert [b.tag for b in part.boxes] == ["large"]
    assert crossing.horizontal == crossing.vertical == crossing.tall == set()


def test_no_tall_or_vertical_items_gives_only_rows():
    e = d = F(1, 3)
    p = PartitionParams(e, d, (e * d) ** 3 / 10, 18)
    inst = make(18, [(18, 2), (9, 6)])
    ref = Packing((Placement(1, 0, 0), Placement(2, 0, 2)), 8)
    cls = {1: "H", 2: "L"}
    part, _ = build_level1_partition(inst, cls, p, ref)
    assert part.tiles()
    assert {b.tag for b in part.boxes} == {"large", "horizontal"}
    assert all(b.h == p.grid_y for b in part.boxes if b.tag == "horizontal")


def test_off_grid_reference_is_rejected():
    e = d = F(1, 3)
    p = PartitionParams(e, d, (e * d) ** 3 / 10, 18)
    inst = make(18, [(9, 6)])
    with pytest.raises(GridViolation):
        build_level1_partition(inst, {1: "L"}, p, Packing((Placement(1, 0, 1),), 7))


@given(instances(), st.sampled_from([(F(1, 3), F(1, 3)), (F(1, 4), F(1, 5))]))
@settings(max_examples=80, deadline=None)
def test_level1_partition_properties_on_heuristic_references(inst, ed):
    e, d = ed
    ref = solve_ffdh(inst)
    if ref.height * e * d < 1 or inst.W * e * d < 1:
        return
    prep = prepare_reference(inst, e, ref, d, (e * d) ** 3 / 10)
    assert validate_packing(prep.instance, prep.packing).ok
    part, _ = build_level1_partition(prep.instance, prep.classification, prep.params, prep.packing)
    assert part.tiles()
    assert len(part.boxes) <= part.bound
    rects = placed_rects(prep.instance, prep.packing)
    assert crossing_rule_violations(part, rects, prep.classification) == []


def test_relocate_crossing():
    e = d = F(1, 3)
    p = PartitionParams(e, d, (e * d) ** 3 / 10, 900)
    empty = relocate_crossing([], [], p, 90)
    assert empty.horizontal_box is None and empty.vertical_boxes == []
    hs = [Rect(k, 5 * k, 0, 10 + k, 3) for k in range(1, 4)]
    rel = relocate_crossing(hs, [], p, 90)
    assert rel.horizontal_box.h == 300 and max(r.top for r in rel.horizontal_items) == 9
    assert [r.w for r in rel.horizontal_items] == [13, 12, 11]
    vs = [Rect(1, 0, 0, 2, 200), Rect(2, 7, 0, 3, 100), Rect(3, 11, 0, 4, 200)]
    rel = relocate_crossing([], vs, p, 90)
    assert [(b.w, b.h) for b in rel.vertical_boxes] == [(6, 200), (3, 100)]
    with pytest.raises(CapacityExceeded):
        relocate_crossing([], vs + [Rect(4, 0, 0, 5, 50)], p, 90)
