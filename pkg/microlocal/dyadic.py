"""
二进立方体模块
Q = 2^{-j}([0,1)^n + k) 的几何、包含关系、枚举以及包含基点的立方体链

所有包含判断都在共同的更细层级上用整数完成, 不经过浮点比较。
"""

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, List, Literal, Optional, Sequence, Tuple, Union

from .config import TruncationConfig
from .exceptions import DimensionMismatchError, TruncationBudgetError

RelateMode = Literal["contains", "in_3Q", "parent", "same_level_neighbor_distance"]


@dataclass(frozen=True, order=True)
class DyadicCube:
    """半开二进立方体, level=j, index=k"""
    level: int
    index: Tuple[int, ...]

    def __post_init__(self) -> None:
        if isinstance(self.index, int):
            object.__setattr__(self, "index", (int(self.index),))
        else:
            object.__setattr__(self, "index", tuple(int(k) for k in self.index))
        object.__setattr__(self, "level", int(self.level))

    @property
    def n(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return math.ldexp(1.0, -self.level)

    @property
    def corner(self) -> Tuple[float, ...]:
        return tuple(math.ldexp(k, -self.level) for k in self.index)

    @property
    def center(self) -> Tuple[float, ...]:
        half = math.ldexp(1.0, -self.level - 1)
        return tuple(c + half for c in self.corner)

    def contains_point(self, x: Sequence[float]) -> bool:
        """半开成员判断: 右侧面不属于立方体"""
        if len(x) != self.n:
            raise DimensionMismatchError(f"点的维数 {len(x)} 与立方体维数 {self.n} 不一致")
        return all(math.floor(math.ldexp(xi, self.level)) == k for xi, k in zip(x, self.index))

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level - 1, tuple(k // 2 for k in self.index))

    def ancestor(self, level: int) -> "DyadicCube":
        """level 层上包含本立方体的唯一立方体"""
        if level > self.level:
            raise ValueError(f"祖先层级 {level} 比立方体层级 {self.level} 更细")
        shift = self.level - level
        return DyadicCube(level, tuple(k >> shift for k in self.index))

    def children(self) -> List["DyadicCube"]:
        return self.descendants(self.level + 1)

    def descendants(self, level: int) -> List["DyadicCube"]:
        """level 层上划分本立方体的全部 2^{n(level-j)} 个子孙"""
        if level < self.level:
            raise ValueError(f"子孙层级 {level} 比立方体层级 {self.level} 更粗")
        shift = level - self.level
        ranges = [range(k << shift, (k + 1) << shift) for k in self.index]
        return [DyadicCube(level, idx) for idx in itertools.product(*ranges)]

    def shifted(self, offset: Sequence[int]) -> "DyadicCube":
        return DyadicCube(self.level, tuple(k + o for k, o in zip(self.index, offset)))

    def __str__(self) -> str:
        return f"Q(j={self.level}, k={self.index})"


@dataclass(frozen=True)
class Region:
    """轴对齐半开盒子 [lower, upper)"""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self) -> None:
        lower = (float(self.lower),) if isinstance(self.lower, (int, float)) else tuple(float(v) for v in self.lower)
        upper = (float(self.upper),) if isinstance(self.upper, (int, float)) else tuple(float(v) for v in self.upper)
        if len(lower) != len(upper):
            raise DimensionMismatchError(f"区域上下角维数不一致: {lower} / {upper}")
        if not all(a < b for a, b in zip(lower, upper)):
            raise ValueError(f"区域下角必须逐分量小于上角: {lower} / {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return len(self.lower)

    def contains_point(self, x: Sequence[float]) -> bool:
        return all(a <= xi < b for a, xi, b in zip(self.lower, x, self.upper))

    def intersects(self, cube: DyadicCube) -> bool:
        corner, side = cube.corner, cube.side
        return all(c < b and c + side > a for c, a, b in zip(corner, self.lower, self.upper))

    @classmethod
    def unit(cls, n: int = 1, side: float = 1.0) -> "Region":
        return cls(tuple([0.0] * n), tuple([float(side)] * n))


def cube_geometry(cube: DyadicCube) -> Tuple[Tuple[float, ...], float, Tuple[float, ...]]:
    """返回 (corner, side, center)"""
    return cube.corner, cube.side, cube.center


def _check_same_dim(P: DyadicCube, Q: DyadicCube) -> None:
    if P.n != Q.n:
        raise DimensionMismatchError(f"立方体维数不一致: {P} / {Q}")


def _span_at(cube: DyadicCube, level: int, lo_pad: int = 0, hi_pad: int = 0) -> List[Tuple[int, int]]:
    """立方体(两侧各扩 pad 个自身边长)在 level 层整数坐标下的 [lo, hi)"""
    shift = level - cube.level
    return [((k - lo_pad) << shift, (k + 1 + hi_pad) << shift) for k in cube.index]


def relate(P: DyadicCube, Q: DyadicCube, mode: RelateMode) -> Union[bool, float, DyadicCube]:
    """
    两个立方体的关系

    Args:
        mode: contains 判断 P ⊆ Q; in_3Q 判断 P ⊆ 3Q;
              parent 返回 P 的父立方体; same_level_neighbor_distance 返回 |x_P - x_Q|

    Raises:
        DimensionMismatchError: 维数不一致
    """
    _check_same_dim(P, Q)
    if mode == "contains":
        return P.level >= Q.level and P.ancestor(Q.level) == Q
    if mode == "in_3Q":
        level = max(P.level, Q.level)
        inner = _span_at(P, level)
        outer = _span_at(Q, level, lo_pad=1, hi_pad=1)
        return all(o_lo <= i_lo and i_hi <= o_hi for (i_lo, i_hi), (o_lo, o_hi) in zip(inner, outer))
    if mode == "parent":
        return P.parent()
    if mode == "same_level_neighbor_distance":
        return math.dist(P.corner, Q.corner)
    raise ValueError(f"未知的关系类型: {mode}")


def index_range_in_3q(Q: DyadicCube, level: int) -> List[Tuple[int, int]]:
    """level 层中落在 3Q 内的立方体指标范围(每个坐标轴一个 [lo, hi), 可能为空)"""
    if level >= Q.level:
        shift = level - Q.level
        return [((k - 1) << shift, (k + 2) << shift) for k in Q.index]
    d = Q.level - level
    return [(-((-(k - 1)) >> d), (k + 2) >> d) for k in Q.index]


def level_index_range(level: int, window: Region) -> List[Tuple[int, int]]:
    """level 层与窗口相交的立方体指标范围"""
    ranges = []
    for a, b in zip(window.lower, window.upper):
        lo = math.floor(math.ldexp(a, level))
        hi = math.ceil(math.ldexp(b, level))
        ranges.append((lo, hi))
    return ranges


def count_cubes(level: int, window: Region) -> int:
    return math.prod(hi - lo for lo, hi in level_index_range(level, window))


def iter_cubes(level: int, window: Region, max_cubes: Optional[int] = None) -> Iterator[DyadicCube]:
    ranges = level_index_range(level, window)
    total = math.prod(hi - lo for lo, hi in ranges)
    if max_cubes is not None and total > max_cubes:
        raise TruncationBudgetError(f"层级 {level} 在窗口内有 {total} 个立方体, 超出预算 {max_cubes}")
    for idx in itertools.product(*(range(lo, hi) for lo, hi in ranges)):
        yield DyadicCube(level, idx)


def enumerate_cubes(
    level: int,
    window: Region,
    max_cubes: Optional[int] = None,
    truncation: Optional[TruncationConfig] = None,
) -> List[DyadicCube]:
    """
    枚举与窗口相交的全部 level 层立方体; 给出 truncation 时层级必须在 [j_min, j_max] 内,
    未给出 max_cubes 时使用其单层上限

    Raises:
        TruncationBudgetError: 层级超出截断范围或数量超出截断预算
    """
    if truncation is not None:
        if not truncation.j_min <= level <= truncation.j_max:
            raise TruncationBudgetError(f"层级 {level} 超出截断范围 [{truncation.j_min}, {truncation.j_max}]")
        if max_cubes is None:
            max_cubes = truncation.max_cubes
    return list(iter_cubes(level, window, max_cubes))


def base_chain(x0: Sequence[float], level_range: Tuple[int, int]) -> List[DyadicCube]:
    """每个层级 l ∈ [lo, hi] 上包含 x0 的唯一立方体, 由粗到细"""
    if isinstance(x0, (int, float)):
        x0 = (float(x0),)
    lo, hi = level_range
    return [
        DyadicCube(level, tuple(math.floor(math.ldexp(xi, level)) for xi in x0))
        for level in range(lo, hi + 1)
    ]
