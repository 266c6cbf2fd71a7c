"""
系数场模块
以二进立方体为指标的稀疏系数序列, 序列空间范数 a^s(e^{s'}_{pq})^σ_{x0} 与加权版本,
逐立方体峰值界, c* 正则化以及分数次极大算子 M_t
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import ndimage

from .config import TruncationConfig
from .dyadic import DyadicCube, Region, level_index_range
from .engine import BlockNormEngine, NormResult, chain_sup, outer_norm
from .exceptions import (
    CalculationError,
    DimensionMismatchError,
    OutputError,
    TruncationBudgetError,
)
from .params import SpaceParams
from .signal import SampledSignal


class CoeffField:
    """
    系数场 c = (c(P))

    非周期场的每个立方体必须在层级窗口内并与空间窗口相交;
    周期场位于 [0,T)^n 环面上, 指标按 T·2^j 取模。
    """

    def __init__(
        self,
        entries: Mapping[DyadicCube, float],
        level_window: Tuple[int, int],
        spatial_window: Optional[Region] = None,
        n: int = 1,
        periodic: bool = False,
        T: Optional[float] = None,
    ):
        j_lo, j_hi = int(level_window[0]), int(level_window[1])
        if j_lo > j_hi:
            raise ValueError(f"层级窗口不合法: {level_window}")
        if periodic:
            if T is None:
                raise ValueError("周期系数场必须给出环面边长 T")
            spatial_window = Region.unit(n, T)
            if math.ldexp(1.0, -j_lo) > T:
                raise ValueError(f"周期场的最粗层级 {j_lo} 大于环面")
        elif spatial_window is None:
            spatial_window = Region.unit(n)
        if spatial_window.n != n:
            raise DimensionMismatchError(f"空间窗口维数 {spatial_window.n} 与 n={n} 不一致")

        self.level_window = (j_lo, j_hi)
        self.spatial_window = spatial_window
        self.n = n
        self.periodic = periodic
        self.T = float(T) if T is not None else None

        store: Dict[DyadicCube, float] = {}
        for cube, amplitude in entries.items():
            if cube.n != n:
                raise DimensionMismatchError(f"立方体 {cube} 维数与场维数 {n} 不一致")
            if not j_lo <= cube.level <= j_hi:
                raise ValueError(f"立方体 {cube} 不在层级窗口 {self.level_window} 内")
            if periodic:
                cube = self._wrap(cube)
            elif not spatial_window.intersects(cube):
                raise ValueError(f"立方体 {cube} 与空间窗口不相交")
            store[cube] = store.get(cube, 0.0) + float(amplitude)
        self._entries = store

    def _wrap(self, cube: DyadicCube) -> DyadicCube:
        count = int(round(self.T * 2.0 ** cube.level))
        return DyadicCube(cube.level, tuple(k % count for k in cube.index))

    def __getitem__(self, cube: DyadicCube) -> float:
        if self.periodic and self.level_window[0] <= cube.level:
            cube = self._wrap(cube)
        return self._entries.get(cube, 0.0)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def items(self) -> Iterable[Tuple[DyadicCube, float]]:
        return self._entries.items()

    @property
    def entries(self) -> Dict[DyadicCube, float]:
        return dict(self._entries)

    def by_level(self) -> Dict[int, List[Tuple[DyadicCube, float]]]:
        grouped: Dict[int, List[Tuple[DyadicCube, float]]] = {}
        for cube, amplitude in sorted(self._entries.items()):
            grouped.setdefault(cube.level, []).append((cube, amplitude))
        return grouped

    def abs_max(self) -> float:
        return max((abs(v) for v in self._entries.values()), default=0.0)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self._entries.values())

    def _like(self, entries: Mapping[DyadicCube, float], **changes) -> "CoeffField":
        kwargs = dict(
            level_window=self.level_window,
            spatial_window=None if self.periodic else self.spatial_window,
            n=self.n,
            periodic=self.periodic,
            T=self.T,
        )
        kwargs.update(changes)
        return CoeffField(entries, **kwargs)

    def scaled(self, factor: float) -> "CoeffField":
        return self._like({cube: factor * v for cube, v in self._entries.items()})

    def abs(self) -> "CoeffField":
        return self._like({cube: abs(v) for cube, v in self._entries.items()})

    def plus(self, other: "CoeffField") -> "CoeffField":
        entries = dict(self._entries)
        for cube, v in other.items():
            entries[cube] = entries.get(cube, 0.0) + v
        lo = min(self.level_window[0], other.level_window[0])
        hi = max(self.level_window[1], other.level_window[1])
        return self._like(entries, level_window=(lo, hi))

    def shifted(self, offset: Sequence[int], level: int) -> "CoeffField":
        """把所有系数平移 offset 个 level 层立方体(各层按 2^{j-level} 换算)"""
        entries = {}
        for cube, v in self._entries.items():
            if cube.level < level:
                raise ValueError(f"立方体 {cube} 比平移层级 {level} 更粗")
            factor = 1 << (cube.level - level)
            entries[cube.shifted([o * factor for o in offset])] = v
        if self.periodic:
            return self._like(entries)
        delta = [math.ldexp(o, -level) for o in offset]
        window = Region(
            tuple(a + d for a, d in zip(self.spatial_window.lower, delta)),
            tuple(b + d for b, d in zip(self.spatial_window.upper, delta)),
        )
        return self._like(entries, spatial_window=window)

    def restrict(self, level_window: Tuple[int, int]) -> "CoeffField":
        lo, hi = level_window
        kept = {cube: v for cube, v in self._entries.items() if lo <= cube.level <= hi}
        return self._like(kept, level_window=(lo, hi))

    def level_array(self, level: int) -> Tuple[np.ndarray, Tuple[int, ...]]:
        """level 层在窗口内的稠密数组及其起始指标"""
        if self.periodic:
            count = int(round(self.T * 2.0 ** level))
            ranges = [(0, count)] * self.n
        else:
            ranges = level_index_range(level, self.spatial_window)
        start = tuple(lo for lo, _ in ranges)
        arr = np.zeros(tuple(hi - lo for lo, hi in ranges))
        for cube, v in self._entries.items():
            if cube.level == level:
                arr[tuple(k - s for k, s in zip(cube.index, start))] = v
        return arr, start

    def to_dict(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "level_window": list(self.level_window),
            "spatial_window": [list(self.spatial_window.lower), list(self.spatial_window.upper)],
            "periodic": self.periodic,
            "T": self.T,
            "entries": [[cube.level, *cube.index, v] for cube, v in sorted(self._entries.items())],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "CoeffField":
        n = int(data.get("n", 1))
        lower, upper = data["spatial_window"]
        entries = {}
        for row in data.get("entries", []):
            entries[DyadicCube(int(row[0]), tuple(int(k) for k in row[1 : 1 + n]))] = float(row[1 + n])
        periodic = bool(data.get("periodic", False))
        return cls(
            entries,
            level_window=tuple(data["level_window"]),
            spatial_window=None if periodic else Region(tuple(lower), tuple(upper)),
            n=n,
            periodic=periodic,
            T=data.get("T"),
        )

    def to_csv(self, path: str) -> Path:
        """CSV: 首行为带窗口信息的 JSON 注释, 其后 level,k1..kn,amplitude"""
        meta = self.to_dict()
        meta.pop("entries")
        target = Path(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", newline="", encoding="utf-8") as f:
                f.write("# " + json.dumps(meta, ensure_ascii=False) + "\n")
                writer = csv.writer(f)
                writer.writerow(["level"] + [f"k{i + 1}" for i in range(self.n)] + ["amplitude"])
                for cube, v in sorted(self._entries.items()):
                    writer.writerow([cube.level, *cube.index, repr(v)])
        except OSError as e:
            raise OutputError(f"保存系数场失败: {e}")
        return target

    @classmethod
    def from_csv(cls, path: str) -> "CoeffField":
        with open(path, "r", newline="", encoding="utf-8") as f:
            meta = json.loads(f.readline().lstrip("#").strip())
            reader = csv.reader(f)
            next(reader)
            meta["entries"] = [[float(x) for x in row] for row in reader if row]
        return cls.from_dict(meta)

    @classmethod
    def single(
        cls, cube: DyadicCube, amplitude: float = 1.0, level_window: Optional[Tuple[int, int]] = None, **kwargs
    ) -> "CoeffField":
        window = level_window or (min(0, cube.level), cube.level)
        return cls({cube: amplitude}, level_window=window, n=cube.n, **kwargs)

    def __repr__(self) -> str:
        return f"CoeffField(entries={len(self)}, levels={self.level_window}, periodic={self.periodic})"


def random_field(
    rng: np.random.Generator,
    level_window: Tuple[int, int],
    spatial_window: Optional[Region] = None,
    density: float = 0.3,
    n: int = 1,
    periodic: bool = False,
    T: Optional[float] = None,
) -> CoeffField:
    """重尾随机场: 以密度 ρ 随机选取立方体, 幅值为带符号的 |N(0,1)|^3"""
    window = Region.unit(n, T) if periodic else (spatial_window or Region.unit(n))
    entries: Dict[DyadicCube, float] = {}
    for level in range(level_window[0], level_window[1] + 1):
        ranges = level_index_range(level, window)
        shape = tuple(hi - lo for lo, hi in ranges)
        mask = rng.random(shape) < density
        values = rng.standard_normal(shape)
        amplitudes = np.sign(values) * np.abs(values) ** 3
        for idx in zip(*np.nonzero(mask)):
            cube = DyadicCube(level, tuple(int(i) + lo for i, (lo, _) in zip(idx, ranges)))
            entries[cube] = float(amplitudes[idx])
    if not any(entries.values()):
        level = int(rng.integers(level_window[0], level_window[1] + 1))
        ranges = level_index_range(level, window)
        idx = tuple(int(rng.integers(lo, hi)) for lo, hi in ranges)
        entries[DyadicCube(level, idx)] = 1.0
    return CoeffField(entries, level_window, None if periodic else window, n=n, periodic=periodic, T=T)


def _check_dimension(c: CoeffField, params: SpaceParams) -> None:
    if c.n != params.n:
        raise DimensionMismatchError(f"系数场维数 {c.n} 与参数维数 {params.n} 不一致")


def build_engine(c: CoeffField, params: SpaceParams, truncation: Optional[TruncationConfig] = None) -> BlockNormEngine:
    """把系数场放到积分节点网格上, 每个最细立方体含 2^{n·refine} 个中点节点"""
    truncation = truncation or TruncationConfig()
    _check_dimension(c, params)
    j_lo, j_hi = c.level_window
    m = j_hi + truncation.quadrature_refine
    if c.periodic:
        per_axis = int(round(c.T * 2.0 ** m))
        node_start = (0,) * c.n
        shape = (per_axis,) * c.n
    else:
        ranges = level_index_range(j_lo, c.spatial_window)
        node_start = tuple(lo << (m - j_lo) for lo, _ in ranges)
        shape = tuple((hi - lo) << (m - j_lo) for lo, hi in ranges)
    budget = truncation.max_cubes << (c.n * truncation.quadrature_refine)
    if math.prod(shape) > budget:
        raise TruncationBudgetError(f"积分节点数 {math.prod(shape)} 超出预算 {budget}")

    layers = {}
    for level in c.by_level():
        arr, _ = c.level_array(level)
        ratio = 1 << (m - level)
        if not c.periodic:
            ranges = level_index_range(level, c.spatial_window)
            level_start = tuple(s // ratio for s in node_start)
            pad = [(lo - s, s + size // ratio - hi) for (lo, hi), s, size in zip(ranges, level_start, shape)]
            arr = np.pad(arr, pad)
        for axis in range(c.n):
            arr = np.repeat(arr, ratio, axis=axis)
        layers[level] = np.abs(arr)
    return BlockNormEngine(
        layers,
        node_level=m,
        node_start=node_start,
        params=params,
        node_offset=0.5,
        period_nodes=shape[0] if c.periodic else None,
    )


def block_norm(
    c: CoeffField, P: DyadicCube, params: SpaceParams, truncation: Optional[TruncationConfig] = None
) -> float:
    """
    c(e^{s'}_{pq})(P) 或加权的 c(ẽ^{s'}_{pq})^σ_{x0}(P)

    Raises:
        CalculationError: P 与空间窗口不相交
    """
    if not c.periodic and not c.spatial_window.intersects(P):
        raise CalculationError(f"立方体 {P} 与系数场空间窗口不相交")
    return build_engine(c, params, truncation).block(P)


def _levels(c: CoeffField, truncation: TruncationConfig) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    j_lo, j_hi = c.level_window
    chain_lo = j_lo - truncation.outer_levels
    return (chain_lo, j_hi), (chain_lo - 1, j_hi)


def space_norm(
    c: CoeffField,
    params: SpaceParams,
    truncation: Optional[TruncationConfig] = None,
    engine: Optional[BlockNormEngine] = None,
) -> NormResult:
    """
    截断的 ‖c‖_{a^s(e^{s'}_{pq})^σ_{x0}} 或加权版本, 附发散标记与外层剖面
    """
    truncation = truncation or TruncationConfig()
    if c.is_zero():
        return NormResult(value=0.0)
    engine = engine or build_engine(c, params, truncation)
    chain_levels, p_levels = _levels(c, truncation)
    result = outer_norm(
        engine, chain_levels, p_levels, truncation.divergence_span, truncation.divergence_factor
    )
    if engine.periodic and len(result.profile) < truncation.divergence_span + 1:
        logger.debug(f"周期场外层链只有 {len(result.profile)} 层, 不做发散判定")
    return result


def space_norm_report(
    c: CoeffField, params: SpaceParams, truncation: Optional[TruncationConfig] = None
) -> Dict[str, object]:
    """范数连同外层链剖面 v(l) 与截断设置, 供发散判定复核"""
    truncation = truncation or TruncationConfig()
    result = space_norm(c, params, truncation)
    report = result.to_dict()
    report.update(
        {
            "params": params.describe(),
            "level_window": list(c.level_window),
            "entries": len(c),
            "truncation": truncation.model_dump(),
        }
    )
    return report


def chain_norm(
    c: CoeffField, params: SpaceParams, truncation: Optional[TruncationConfig] = None
) -> NormResult:
    """点型上确界 sup_{Q ∋ x0} l(Q)^{-(σ+s)} c(e^{s'}_{pq})(Q)"""
    truncation = truncation or TruncationConfig()
    if c.is_zero():
        return NormResult(value=0.0)
    engine = build_engine(c, params, truncation)
    chain_levels, _ = _levels(c, truncation)
    return chain_sup(engine, chain_levels, truncation.divergence_span, truncation.divergence_factor)


@dataclass(frozen=True)
class BoundCheck:
    """逐系数峰值界的拟合结果"""
    C: float
    kappa: float
    norm: float
    holds: bool
    holds_unit_kappa: bool
    diverging: bool

    def to_dict(self) -> Dict[str, object]:
        return dict(self.__dict__)


def bound_kappa(params: SpaceParams) -> float:
    """峰值界 C ≤ κ·‖c‖ 中的实现常数 κ"""
    sigma, root_n = params.sigma, math.sqrt(params.n)
    if params.tilde:
        return (1.0 + root_n) ** sigma if sigma >= 0 else (2.0 + root_n) ** (-sigma)
    return 2.0 ** sigma if sigma >= 0 else (1.0 + root_n) ** (-sigma)


def coefficient_bound_check(
    c: CoeffField,
    params: SpaceParams,
    truncation: Optional[TruncationConfig] = None,
    rel_tol: float = 1e-12,
) -> BoundCheck:
    """
    拟合 |c(P)| ≤ C(|x0 - x_P| + l(P))^σ l(P)^{s+s'-n/p} 的最小 C, 并与 κ·space_norm 比较
    """
    _check_dimension(c, params)
    x0 = np.asarray(params.x0)
    exponent = params.s + params.s_prime - params.n_over_p
    fitted = 0.0
    for cube, amplitude in c.items():
        side = cube.side
        distance = float(np.linalg.norm(x0 - np.asarray(cube.corner)))
        bound = (distance + side) ** params.sigma * side ** exponent
        fitted = max(fitted, abs(amplitude) / bound)
    norm = space_norm(c, params, truncation)
    kappa = bound_kappa(params)
    limit = norm.value * (1.0 + rel_tol)
    return BoundCheck(
        C=fitted,
        kappa=kappa,
        norm=norm.value,
        holds=fitted <= kappa * limit,
        holds_unit_kappa=fitted <= limit,
        diverging=norm.diverging,
    )


def regularize_star(c: CoeffField, L: float, max_cubes: Optional[int] = None) -> CoeffField:
    """
    c*(P) = Σ_{l(R)=l(P)} |c(R)| (1 + 2^j |x_P - x_R|)^{-L}, 逐层在空间窗口上计算

    Raises:
        CalculationError: L ≤ n 时核不可和
    """
    if L <= c.n:
        raise CalculationError(f"L={L} 必须大于维数 n={c.n}")
    result: Dict[DyadicCube, float] = {}
    for level, items in c.by_level().items():
        arr, start = c.level_array(level)
        if max_cubes is not None and arr.size > max_cubes:
            raise TruncationBudgetError(f"层级 {level} 的立方体数 {arr.size} 超出预算 {max_cubes}")
        targets = np.stack(np.meshgrid(*[np.arange(s, s + size) for s, size in zip(start, arr.shape)], indexing="ij"), -1)
        targets = targets.reshape(-1, c.n).astype(float)
        sources = np.array([cube.index for cube, _ in items], dtype=float)
        weights = np.abs(np.array([v for _, v in items]))
        diff = targets[:, None, :] - sources[None, :, :]
        if c.periodic:
            count = arr.shape[0]
            diff = (diff + count / 2.0) % count - count / 2.0
        distance = np.sqrt(np.sum(diff ** 2, axis=-1))
        star = ((1.0 + distance) ** (-L)) @ weights
        for idx, value in zip(targets.astype(int), star):
            result[DyadicCube(level, tuple(idx))] = float(value)
    return c._like(result)


CubeClass = Literal["dyadic", "dyadic3"]


def maximal_Mt(g: SampledSignal, t: float, cube_class: CubeClass = "dyadic3") -> SampledSignal:
    """
    M_t g(x) = sup_{Q ∋ x} (l(Q)^{-n} ∫_Q |g|^t)^{1/t}

    立方体类为二进立方体(dyadic)或再加上它们的 3 倍扩张(dyadic3); 样本 i 代表单元 [ih, (i+1)h)。

    Raises:
        CalculationError: t 不在 (0,1] 内
    """
    if not 0 < t <= 1:
        raise CalculationError(f"t 必须在 (0,1] 内: {t}")
    base = np.abs(np.asarray(g.samples)) ** t
    N, n = g.N, g.n
    best = base.copy()
    width = 1
    while width <= N:
        count = N // width
        shape: List[int] = []
        for _ in range(n):
            shape.extend([count, width])
        averages = base.reshape(shape).mean(axis=tuple(range(1, 2 * n, 2)))
        candidates = averages
        if cube_class == "dyadic3":
            if count >= 3:
                dilated = ndimage.uniform_filter(averages, size=3, mode="wrap")
                candidates = np.maximum(averages, ndimage.maximum_filter(dilated, size=3, mode="wrap"))
            else:
                logger.debug(f"宽度 {width} 的立方体只有 {count} 个, 跳过 3 倍扩张")
        upsampled = candidates
        for axis in range(n):
            upsampled = np.repeat(upsampled, width, axis=axis)
        best = np.maximum(best, upsampled)
        width *= 2
    return g.with_samples(best ** (1.0 / t))
