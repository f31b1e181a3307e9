import numpy as np
import pytest

from oracles import brute_force_fronts
from varexplore.errors import DimensionMismatch
from varexplore.pareto import crowding_distance, dominates, nondominated_sort, pareto_front

MIN2 = ["minimize", "minimize"]


def test_hand_example():
    assert nondominated_sort([(1, 2), (2, 1), (2, 2), (3, 3)], MIN2) == [[0, 1], [2], [3]]


def test_single_point():
    assert nondominated_sort([(5.0, 1.0)], MIN2) == [[0]]


def test_empty():
    assert nondominated_sort([], MIN2) == []


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        nondominated_sort([(1, 2, 3)], MIN2)


def test_maximize_flips_order():
    pts = [(1, 2), (2, 1), (2, 2), (3, 3)]
    assert nondominated_sort(pts, ["maximize", "maximize"]) == [[3], [2], [0, 1]]


def test_duplicates_share_a_front():
    assert nondominated_sort([(1, 1), (1, 1), (2, 2)], MIN2) == [[0, 1], [2]]


def test_dominates():
    assert dominates((1, 1), (1, 2), MIN2)
    assert not dominates((1, 1), (1, 1), MIN2)
    assert dominates((3, 1), (2, 1), ["maximize", "minimize"])


def test_random_200_points_match_oracle():
    rng = np.random.default_rng(0)
    pts = rng.random((200, 2)).tolist()
    assert nondominated_sort(pts, MIN2) == brute_force_fronts(pts, MIN2)


def test_front_properties():
    rng = np.random.default_rng(5)
    dirs = ["minimize", "maximize", "minimize"]
    pts = rng.integers(0, 6, size=(120, 3)).tolist()
    fronts = nondominated_sort(pts, dirs)
    assert sorted(i for f in fronts for i in f) == list(range(120))
    for k, front in enumerate(fronts):
        for i in front:
            assert not any(dominates(pts[j], pts[i], dirs) for j in front)
            if k:
                assert any(dominates(pts[j], pts[i], dirs) for j in fronts[k - 1])


def test_pareto_front_helper():
    assert pareto_front([(1, 2), (2, 1), (2, 2)], MIN2) == [0, 1]


def test_crowding_two_points_infinite():
    assert np.all(np.isinf(crowding_distance([(0, 1), (1, 0)])))


def test_crowding_hand_example():
    d = crowding_distance([(0, 2), (1, 1), (2, 0)])
    assert np.isinf(d[0]) and np.isinf(d[2])
    assert d[1] == pytest.approx((2 - 0) / 2 + (2 - 0) / 2)


def test_crowding_identical_points():
    d = crowding_distance([(1.0, 1.0)] * 5)
    assert np.isinf(d).sum() == 2
    assert np.all(d[np.isfinite(d)] == 0.0)


def test_crowding_constant_objective_contributes_zero():
    d = crowding_distance([(0.0, 3.0), (1.0, 3.0), (4.0, 3.0)])
    assert d[1] == pytest.approx((4.0 - 0.0) / 4.0)


def test_matrix_oracle_agrees_with_loop_oracle():
    from oracles import matrix_fronts
    rng = np.random.default_rng(9)
    for _ in range(30):
        m = int(rng.integers(2, 5))
        dirs = [str(d) for d in rng.choice(["minimize", "maximize"], m)]
        pts = rng.integers(0, 5, size=(int(rng.integers(1, 40)), m)).tolist()
        assert matrix_fronts(pts, dirs) == brute_force_fronts(pts, dirs)
