"""
块范数聚合引擎
coeff_field 与 lp_transform 共用: 把逐层的 |c(R_i(x))| 或 |φ_i * f|(x) 放在统一的节点网格上,
再按 B/F 族的规则聚合成 c(e^{s'}_{pq})(P), 以及外层 sup 结构与发散判定。
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .dyadic import DyadicCube, base_chain, index_range_in_3q
from .params import SpaceParams


@dataclass(frozen=True)
class NormResult:
    """截断范数值, 发散标记以及逐层剖面"""
    value: float
    diverging: bool = False
    profile: Tuple[Tuple[int, float], ...] = ()

    def __float__(self) -> float:
        return float(self.value)

    def to_dict(self) -> Dict[str, object]:
        return {
            "value": self.value,
            "diverging": self.diverging,
            "profile": [[level, value] for level, value in self.profile],
        }


def divergence_flag(values: Sequence[float], span: int, factor: float) -> bool:
    """
    values 由粗到细排列; 前 span+1 个值严格向粗层单调增长且总增长超过 factor 时判为发散
    """
    if len(values) < span + 1:
        return False
    head = list(values[: span + 1])
    strictly = all(a > b for a, b in zip(head, head[1:]))
    return strictly and head[0] > factor * head[-1]


def _coarsen(values: np.ndarray, start: Sequence[int], ratio: int, how: str) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """把节点数组按 ratio 合并到粗层立方体, 返回 (数组, 立方体起始指标)"""
    if ratio == 1:
        return values, tuple(start)
    pads = []
    cube_start = []
    shape: List[int] = []
    for s, size in zip(start, values.shape):
        k0 = s // ratio
        left = s - k0 * ratio
        count = -(-(left + size) // ratio)
        pads.append((left, count * ratio - left - size))
        cube_start.append(k0)
        shape.extend([count, ratio])
    padded = np.pad(values, pads) if any(a or b for a, b in pads) else values
    blocks = padded.reshape(shape)
    axes = tuple(range(1, 2 * values.ndim, 2))
    reduced = blocks.max(axis=axes) if how == "max" else blocks.sum(axis=axes)
    return reduced, tuple(cube_start)


class BlockNormEngine:
    """
    块范数引擎

    Args:
        layers: 层级 i -> 节点网格上的非负幅值 |c(R_i(x))| (尚未乘 2^{is'} 与权重)
        node_level: 节点层级 m, 节点间距 h = 2^{-m}
        node_start: 节点网格起始指标(m 层整数坐标)
        params: 空间参数
        node_offset: 节点在其单元内的位置, 0.5 为中点, 0 为左端点
        period_nodes: 周期情形下每个坐标轴的节点数, 非周期为 None
    """

    def __init__(
        self,
        layers: Dict[int, np.ndarray],
        node_level: int,
        node_start: Sequence[int],
        params: SpaceParams,
        node_offset: float = 0.5,
        period_nodes: Optional[int] = None,
    ):
        self.params = params
        self.node_level = int(node_level)
        self.node_start = tuple(int(s) for s in node_start)
        self.period_nodes = period_nodes
        self.h = math.ldexp(1.0, -self.node_level)
        self.levels = sorted(layers)
        self._cache: Dict[int, Tuple[np.ndarray, Tuple[int, ...]]] = {}

        shape = next(iter(layers.values())).shape if layers else tuple([1] * params.n)
        self.shape = tuple(shape)
        distance = self._distance_to_x0(node_offset) if params.tilde else None

        self._weighted: Dict[int, np.ndarray] = {}
        for level in self.levels:
            g = np.abs(np.asarray(layers[level], dtype=float)) * 2.0 ** (level * params.s_prime)
            if distance is not None and params.sigma != 0.0:
                g = g * (2.0 ** (-level) + distance) ** (-params.sigma)
            self._weighted[level] = g

    @property
    def periodic(self) -> bool:
        return self.period_nodes is not None

    @property
    def torus_level(self) -> Optional[int]:
        """周期情形下与整个环面同大的立方体层级"""
        if self.period_nodes is None:
            return None
        return self.node_level - int(round(math.log2(self.period_nodes)))

    def _distance_to_x0(self, offset: float) -> np.ndarray:
        sq = np.zeros(self.shape)
        period = None if self.period_nodes is None else self.period_nodes * self.h
        for axis, (s, size) in enumerate(zip(self.node_start, self.shape)):
            coords = (s + np.arange(size) + offset) * self.h
            d = coords - self.params.x0[axis]
            if period is not None:
                d = (d + period / 2.0) % period - period / 2.0
            view = [1] * len(self.shape)
            view[axis] = size
            sq = sq + (d ** 2).reshape(view)
        return np.sqrt(sq)

    def level_blocks(self, j: int) -> Tuple[np.ndarray, Tuple[int, ...]]:
        """j 层全部立方体的块范数 c(e^{s'}_{pq})(P), 返回 (数组, 起始指标)"""
        if j not in self._cache:
            if j > self.node_level:
                raise ValueError(f"层级 {j} 比节点层级 {self.node_level} 更细")
            if self.periodic and j < self.torus_level:
                raise ValueError(f"周期情形下层级 {j} 的立方体大于环面")
            self._cache[j] = self._compute_level(j)
        return self._cache[j]

    def _compute_level(self, j: int) -> Tuple[np.ndarray, Tuple[int, ...]]:
        p, q, n = self.params.p, self.params.q, self.params.n
        ratio = 1 << (self.node_level - j)
        vol = self.h ** n
        active = [i for i in self.levels if i >= j]

        if not active:
            zero, start = _coarsen(np.zeros(self.shape), self.node_start, ratio, "sum")
            return zero, start

        if self.params.family == "B":
            total = None
            for i in active:
                g = self._weighted[i]
                if math.isinf(p):
                    m_i, start = _coarsen(g, self.node_start, ratio, "max")
                    u = m_i if math.isinf(q) else m_i ** q
                else:
                    m_i, start = _coarsen(g ** p * vol, self.node_start, ratio, "sum")
                    u = m_i ** (1.0 / p) if math.isinf(q) else m_i ** (q / p)
                if total is None:
                    total = u
                else:
                    total = np.maximum(total, u) if math.isinf(q) else total + u
            return (total if math.isinf(q) else total ** (1.0 / q)), start

        if math.isinf(q):
            S = np.max([self._weighted[i] for i in active], axis=0)
        else:
            S = np.sum([self._weighted[i] ** q for i in active], axis=0)
        if math.isinf(p):
            if math.isinf(q):
                return _coarsen(S, self.node_start, ratio, "max")
            integral, start = _coarsen(S * vol, self.node_start, ratio, "sum")
            return (integral * 2.0 ** (j * n)) ** (1.0 / q), start
        power = p if math.isinf(q) else p / q
        integral, start = _coarsen(S ** power * vol, self.node_start, ratio, "sum")
        return integral ** (1.0 / p), start

    def _take(self, values: np.ndarray, start: Sequence[int], ranges: Sequence[Tuple[int, int]]) -> np.ndarray:
        index = []
        for axis, ((lo, hi), s) in enumerate(zip(ranges, start)):
            size = values.shape[axis]
            if self.periodic:
                if hi - lo >= size:
                    idx = np.arange(size)
                else:
                    idx = np.arange(lo, hi) % size
            else:
                a, b = max(lo, s), min(hi, s + size)
                idx = np.arange(a - s, b - s) if b > a else np.arange(0)
            index.append(idx)
        return values[np.ix_(*index)]

    def block(self, cube: DyadicCube) -> float:
        """单个立方体的块范数; 节点网格之外为 0"""
        values, start = self.level_blocks(cube.level)
        ranges = [(k, k + 1) for k in cube.index]
        sub = self._take(values, start, ranges)
        return float(sub.max()) if sub.size else 0.0

    def max_block_in(self, j: int, ranges: Sequence[Tuple[int, int]]) -> float:
        if any(hi <= lo for lo, hi in ranges):
            return 0.0
        values, start = self.level_blocks(j)
        sub = self._take(values, start, ranges)
        return float(sub.max()) if sub.size else 0.0

    def max_block(self, j: int) -> float:
        values, _ = self.level_blocks(j)
        return float(values.max()) if values.size else 0.0

    def clip_levels(self, lo: int, hi: int) -> Tuple[int, int]:
        """把 P 层级范围限制在引擎可计算的范围内"""
        if self.periodic:
            lo = max(lo, self.torus_level)
        return lo, min(hi, self.node_level)


def outer_norm(
    engine: BlockNormEngine,
    chain_levels: Tuple[int, int],
    p_levels: Tuple[int, int],
    span: int,
    factor: float,
) -> NormResult:
    """
    外层 sup 结构

    非加权: sup_{Q ∋ x0} l(Q)^{-σ} sup_{P ⊆ 3Q} l(P)^{-s} block(P);
    加权: sup_P l(P)^{-s} block(P)。
    """
    params = engine.params
    p_lo, p_hi = engine.clip_levels(*p_levels)

    if params.tilde:
        profile = []
        for j in range(p_lo, p_hi + 1):
            profile.append((j, 2.0 ** (j * params.s) * engine.max_block(j)))
        values = [v for _, v in profile]
        value = max(values) if values else 0.0
        diverging = divergence_flag(values, span, factor)
        return NormResult(value=value, diverging=diverging, profile=tuple(profile))

    c_lo, c_hi = chain_levels
    if engine.periodic:
        c_lo = max(c_lo, engine.torus_level)
    profile = []
    for Q in base_chain(params.x0, (c_lo, c_hi)):
        inner = 0.0
        for j in range(max(Q.level - 1, p_lo), p_hi + 1):
            block = engine.max_block_in(j, index_range_in_3q(Q, j))
            inner = max(inner, 2.0 ** (j * params.s) * block)
        profile.append((Q.level, 2.0 ** (Q.level * params.sigma) * inner))
    values = [v for _, v in profile]
    value = max(values) if values else 0.0
    diverging = divergence_flag(values, span, factor)
    if diverging:
        logger.info(f"外层链在最粗 {span + 1} 层持续增长, 标记为发散: {values[: span + 1]}")
    return NormResult(value=value, diverging=diverging, profile=tuple(profile))


def chain_sup(
    engine: BlockNormEngine,
    chain_levels: Tuple[int, int],
    span: int,
    factor: float,
) -> NormResult:
    """sup_{Q ∋ x0} l(Q)^{-(σ+s)} block(Q)"""
    params = engine.params
    c_lo, c_hi = engine.clip_levels(*chain_levels)
    profile = []
    for Q in base_chain(params.x0, (c_lo, c_hi)):
        profile.append((Q.level, 2.0 ** (Q.level * (params.sigma + params.s)) * engine.block(Q)))
    values = [v for _, v in profile]
    return NormResult(
        value=max(values) if values else 0.0,
        diverging=divergence_flag(values, span, factor),
        profile=tuple(profile),
    )
