"""
二进立方体测试

- 几何量 corner/side/center 按 2^{-j}k 精确计算
- relate 的四种模式, 3Q 判断的单调性
- 枚举与窗口相交的立方体, 超出预算时报错
- base_chain 嵌套且每层都包含 x0
"""

import pytest
from pytest import approx

from microlocal.config import TruncationConfig
from microlocal.dyadic import (
    DyadicCube,
    Region,
    base_chain,
    count_cubes,
    cube_geometry,
    enumerate_cubes,
    index_range_in_3q,
    relate,
)
from microlocal.exceptions import DimensionMismatchError, TruncationBudgetError


class TestGeometry:
    @pytest.mark.parametrize(
        "level,index,corner,side,center",
        [
            (0, (0,), (0.0,), 1.0, (0.5,)),
            (3, (5,), (0.625,), 0.125, (0.6875,)),
            (1, (-1, 0), (-0.5, 0.0), 0.5, (-0.25, 0.25)),
        ],
    )
    def test_cube_geometry(self, level, index, corner, side, center):
        got_corner, got_side, got_center = cube_geometry(DyadicCube(level, index))
        assert got_corner == corner
        assert got_side == side
        assert got_center == center

    def test_int_index_is_normalized(self):
        assert DyadicCube(2, 3) == DyadicCube(2, (3,))

    def test_children_partition(self):
        Q = DyadicCube(1, (1, 0))
        children = Q.children()
        assert len(children) == 4
        assert all(child.parent() == Q for child in children)

    def test_descendants_cover_measure(self):
        Q = DyadicCube(2, (1,))
        cubes = Q.descendants(5)
        assert len(cubes) == 8
        assert sum(c.side for c in cubes) == approx(Q.side)
        assert len(set(cubes)) == len(cubes)

    def test_half_open_membership(self):
        Q = DyadicCube(1, (0,))
        assert Q.contains_point((0.0,))
        assert not Q.contains_point((0.5,))


class TestRelate:
    def test_parent(self):
        assert relate(DyadicCube(3, (5,)), DyadicCube(3, (5,)), "parent") == DyadicCube(2, (2,))

    def test_in_3q_unit_cube(self):
        # [-0.5, -0.25) ⊆ 3[0,1) = [-1, 2)
        assert relate(DyadicCube(2, (-2,)), DyadicCube(0, (0,)), "in_3Q")

    def test_in_3q_outside(self):
        assert not relate(DyadicCube(0, (2,)), DyadicCube(0, (0,)), "in_3Q")

    def test_contains(self):
        assert relate(DyadicCube(1, (0,)), DyadicCube(0, (0,)), "contains")
        assert not relate(DyadicCube(1, (1,)), DyadicCube(1, (0,)), "contains")

    def test_neighbor_distance(self):
        d = relate(DyadicCube(2, (1,)), DyadicCube(2, (3,)), "same_level_neighbor_distance")
        assert d == approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            relate(DyadicCube(0, (0,)), DyadicCube(0, (0, 0)), "contains")

    def test_in_3q_monotone(self):
        Q = DyadicCube(1, (0,))
        for P in enumerate_cubes(2, Region((-1.0,), (2.0,))):
            if relate(P, Q, "in_3Q"):
                assert all(relate(child, Q, "in_3Q") for child in P.children())

    def test_index_range_in_3q_matches_relate(self):
        Q = DyadicCube(2, (1,))
        for level in (0, 1, 2, 4):
            (lo, hi), = index_range_in_3q(Q, level)
            inside = [P.index[0] for P in enumerate_cubes(level, Region((-2.0,), (3.0,))) if relate(P, Q, "in_3Q")]
            assert inside == list(range(lo, hi))


class TestEnumerate:
    def test_level_one_unit_window(self):
        cubes = enumerate_cubes(1, Region.unit(1))
        assert cubes == [DyadicCube(1, (0,)), DyadicCube(1, (1,))]

    def test_level_zero_wide_window(self):
        assert len(enumerate_cubes(0, Region((-1.0,), (2.0,)))) == 3

    def test_count_two_dimensions(self):
        assert count_cubes(2, Region.unit(2)) == 16

    def test_budget(self):
        with pytest.raises(TruncationBudgetError):
            enumerate_cubes(12, Region.unit(1), max_cubes=100)

    @pytest.mark.parametrize("level", [-1, 5])
    def test_level_outside_truncation(self, level):
        with pytest.raises(TruncationBudgetError):
            enumerate_cubes(level, Region.unit(1), truncation=TruncationConfig(j_min=0, j_max=4))

    def test_truncation_budget(self):
        truncation = TruncationConfig(j_min=0, j_max=12, max_cubes=100)
        assert len(enumerate_cubes(4, Region.unit(1), truncation=truncation)) == 16
        with pytest.raises(TruncationBudgetError):
            enumerate_cubes(12, Region.unit(1), truncation=truncation)

    def test_empty_region_rejected(self):
        with pytest.raises(ValueError):
            Region((1.0,), (0.0,))


class TestBaseChain:
    def test_binary_expansion(self):
        chain = base_chain((0.3,), (0, 2))
        assert chain == [DyadicCube(0, (0,)), DyadicCube(1, (0,)), DyadicCube(2, (1,))]

    def test_nested_and_contains_x0(self):
        x0 = (0.7, -0.2)
        chain = base_chain(x0, (-3, 6))
        for Q in chain:
            assert Q.contains_point(x0)
        for coarse, fine in zip(chain, chain[1:]):
            assert fine.parent() == coarse
