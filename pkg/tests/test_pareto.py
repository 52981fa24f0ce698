import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import grid_hypervolume, nondominated_quadratic, peel_ranks

from clscopt.model import ObjectiveVector
from clscopt.pareto import (
    FrontPoint,
    ParetoFront,
    Provenance,
    coverage,
    crowding_distance,
    dominates,
    fast_nondominated_sort,
    hypervolume,
    nondominated_filter,
    reference_from_worst,
    weakly_dominates,
)

coord = st.integers(min_value=0, max_value=6)
point = st.tuples(coord, coord, coord)


def test_dominates_native_orientation():
    D = 1000.0
    assert dominates(ObjectiveVector(100, 50, 0.9 * D), ObjectiveVector(120, 60, 0.8 * D))
    a = ObjectiveVector(100, 50, 10)
    assert not dominates(a, a)
    b, c = ObjectiveVector(100, 60, 7), ObjectiveVector(120, 50, 7)
    assert not dominates(b, c) and not dominates(c, b)


def test_canonical_dominance_matches_native_order():
    rng = np.random.default_rng(5)
    for _ in range(100):
        a = ObjectiveVector(*rng.integers(0, 4, 3).astype(float))
        b = ObjectiveVector(*rng.integers(0, 4, 3).astype(float))
        native = (a[0] <= b[0] and a[1] <= b[1] and a[2] >= b[2]
                  and (a[0] < b[0] or a[1] < b[1] or a[2] > b[2]))
        assert dominates(a, b) == native


@settings(max_examples=200, deadline=None)
@given(point, point, point)
def test_dominance_is_a_strict_order(a, b, c):
    assert not dominates(a, a)
    assert not (dominates(a, b) and dominates(b, a))
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


def test_weak_dominance_tolerance():
    assert weakly_dominates((101, 10, -5), (100, 10, -5), rel_tol=0.01)
    assert not weakly_dominates((102, 10, -5), (100, 10, -5), rel_tol=0.01)


def test_filter_examples():
    assert nondominated_filter([(1, 2, 3)]) == [(1, 2, 3)]
    a, b = ObjectiveVector(1, 1, 1), ObjectiveVector(2, 2, 0)
    assert nondominated_filter([a, b]) == [a]


def test_filter_matches_pairwise_oracle():
    rng = np.random.default_rng(1)
    for n in (1, 5, 100):
        F = rng.integers(0, 10, (n, 3)).astype(float)
        got = nondominated_filter(list(F))
        expected = F[nondominated_quadratic(F)]
        assert np.array_equal(np.array(got), expected)


@settings(max_examples=100, deadline=None)
@given(st.lists(point, min_size=1, max_size=25), st.randoms(use_true_random=False))
def test_filter_idempotent_and_permutation_invariant(points, rnd):
    once = nondominated_filter(points)
    assert nondominated_filter(once) == once
    shuffled = list(points)
    rnd.shuffle(shuffled)
    assert sorted(nondominated_filter(shuffled)) == sorted(once)


def test_sort_examples():
    fronts, rank = fast_nondominated_sort([(1, 3, 2), (3, 1, 2), (2, 2, 1)])
    assert len(fronts) == 1
    fronts, rank = fast_nondominated_sort([(3, 3, 3), (1, 1, 1), (2, 2, 2)])
    assert fronts == [[1], [2], [0]]
    assert rank.tolist() == [2, 0, 1]


def test_sort_matches_peeling_oracle():
    rng = np.random.default_rng(2)
    F = rng.integers(0, 12, (200, 3)).astype(float)
    _, rank = fast_nondominated_sort(F)
    assert np.array_equal(rank, peel_ranks(F))


def test_crowding_boundaries_and_middle():
    assert np.all(np.isinf(crowding_distance([(0, 1, 1), (1, 0, 0)])))
    d = crowding_distance(np.array([(0, 2, 2), (1, 1, 1), (2, 0, 0)], dtype=float))
    assert np.isinf(d[0]) and np.isinf(d[2])
    # each objective contributes (2 - 0) / 2 = 1
    assert d[1] == pytest.approx(3.0)


def test_crowding_permutation_invariant():
    rng = np.random.default_rng(4)
    F = rng.random((12, 3))
    perm = rng.permutation(12)
    assert np.array_equal(crowding_distance(F)[perm], crowding_distance(F[perm]))


def test_hypervolume_examples():
    assert hypervolume([(1, 1, 1)], (2, 2, 2)) == 1.0
    # golden value fixed from the integer-grid oracle
    assert hypervolume([(1, 2, 2), (2, 1, 2)], (3, 3, 3)) == pytest.approx(3.0, abs=1e-12)


def test_hypervolume_rejects_points_outside_reference():
    with pytest.raises(ValueError):
        hypervolume([(1, 1, 3)], (2, 2, 2))


def test_hypervolume_matches_grid_oracle_on_small_fronts():
    """Every front of up to 4 points from a small lattice, deduplicated."""
    rng = np.random.default_rng(8)
    ref = (5, 5, 5)
    lattice = list(itertools.product(range(5), repeat=3))
    for n in range(1, 5):
        for _ in range(150):
            idx = rng.choice(len(lattice), size=n, replace=False)
            pts = [lattice[i] for i in idx]
            got = hypervolume(np.array(pts, dtype=float), ref)
            assert abs(got - grid_hypervolume(pts, ref)) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.lists(point, min_size=1, max_size=4), point)
def test_hypervolume_monotone(points, extra):
    ref = (7, 7, 7)
    base = hypervolume(np.array(points, dtype=float), ref)
    with_extra = hypervolume(np.array(points + [extra], dtype=float), ref)
    assert with_extra >= base - 1e-12
    dominated = any(all(p[i] <= extra[i] for i in range(3)) for p in points)
    if dominated:
        assert with_extra == pytest.approx(base, abs=1e-12)
    else:
        assert with_extra > base


def test_reference_from_worst_moves_outward():
    ref = reference_from_worst([100.0, 0.0, -50.0])
    assert ref.tolist() == pytest.approx([110.0, 1.0, -45.0])


def test_coverage_examples():
    A = [(1, 1, 1)]
    assert coverage(A, [(2, 2, 2), (0, 3, 3)]) == 0.5
    B = [(1, 2, 3), (3, 2, 1)]
    assert coverage(B, B) == 1.0
    assert coverage(A + [(0, 3, 3)], [(2, 2, 2), (0, 3, 3)]) == 1.0
    with pytest.raises(ValueError):
        coverage(A, [])


def test_front_merges_duplicates_and_filters():
    v1, v2, v3 = ObjectiveVector(1, 2, 3), ObjectiveVector(2, 1, 3), ObjectiveVector(3, 3, 1)
    pts = [
        FrontPoint(v1, None, (Provenance("ga", generation=1),)),
        FrontPoint(v1, None, (Provenance("weighted-sum", weights=(1.0, 0.0, 0.0)),)),
        FrontPoint(v2, None, ()),
        FrontPoint(v3, None, ()),
    ]
    front = ParetoFront.from_points(pts)
    assert len(front) == 2
    assert front.is_mutually_nondominated()
    assert len(front[0].provenance) == 2
    assert [p.objectives for p in front.sorted()] == [v1, v2]
