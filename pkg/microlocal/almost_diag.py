"""
几乎对角矩阵模块
以二进立方体为指标的矩阵: 衰减条件验证, 作用于系数场, A0/A1/A2 分解以及有界性检验
"""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .coeff_field import CoeffField, random_field, space_norm
from .config import HarnessConfig, TruncationConfig
from .dyadic import DyadicCube, Region, base_chain, enumerate_cubes
from .exceptions import DimensionMismatchError
from .params import SpaceParams
from .rng import derive_rng


@dataclass(frozen=True)
class AlmostDiagSpec:
    """(r1, r2, L)-几乎对角参数与常数 C"""
    r1: float
    r2: float
    L: float
    C: float = 1.0

    def __post_init__(self) -> None:
        if self.r1 < 0 or self.r2 < 0 or self.C < 0:
            raise ValueError(f"r1, r2, C 必须非负: {self}")
        if self.L <= 0:
            raise ValueError(f"L 必须为正: {self.L}")

    def to_dict(self) -> Dict[str, float]:
        return {"r1": self.r1, "r2": self.r2, "L": self.L, "C": self.C}


@dataclass(frozen=True, eq=False)
class CubeSet:
    """一组立方体的层级, 角点与边长数组"""
    cubes: Tuple[DyadicCube, ...]
    levels: np.ndarray
    corners: np.ndarray
    sides: np.ndarray

    @classmethod
    def of(cls, cubes: Sequence[DyadicCube]) -> "CubeSet":
        cubes = tuple(cubes)
        n = cubes[0].n if cubes else 1
        levels = np.array([c.level for c in cubes], dtype=int)
        corners = np.array([c.corner for c in cubes], dtype=float).reshape(len(cubes), n)
        return cls(cubes, levels, corners, np.ldexp(1.0, -levels))

    def __len__(self) -> int:
        return len(self.cubes)


Generator = Callable[[CubeSet, CubeSet], np.ndarray]


def envelope(rows: CubeSet, cols: CubeSet, spec: AlmostDiagSpec) -> np.ndarray:
    """
    几乎对角包络(C=1): l(Q) ≤ l(P) 时 (l(Q)/l(P))^{r1}(1+|x_Q-x_P|/l(P))^{-L},
    否则 (l(P)/l(Q))^{r2}(1+|x_Q-x_P|/l(Q))^{-L}
    """
    lq = rows.sides[:, None]
    lp = cols.sides[None, :]
    dist = np.sqrt(np.sum((rows.corners[:, None, :] - cols.corners[None, :, :]) ** 2, axis=-1))
    finer = lq <= lp
    coarse_side = np.where(finer, lp, lq)
    ratio = np.where(finer, lq / lp, lp / lq)
    power = np.where(finer, spec.r1, spec.r2)
    return ratio ** power * (1.0 + dist / coarse_side) ** (-spec.L)


def _mix(values: np.ndarray) -> np.ndarray:
    """splitmix64 混合, 用于与深度无关的确定性符号"""
    z = values.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def cube_signs(cubes: CubeSet, seed: int = 0) -> np.ndarray:
    """每个立方体的 ±1 符号, 只依赖 (seed, level, index)"""
    with np.errstate(over="ignore"):
        key = _mix(np.full(len(cubes), seed, dtype=np.int64).astype(np.uint64))
        key = _mix(key ^ (cubes.levels.astype(np.int64) + 64).astype(np.uint64))
        for axis in range(cubes.corners.shape[1]):
            index = np.array([c.index[axis] for c in cubes.cubes], dtype=np.int64)
            key = _mix(key ^ (index + (1 << 40)).astype(np.uint64))
    return np.where((key & np.uint64(1)) == 0, 1.0, -1.0)


class CubeMatrix:
    """
    立方体指标矩阵 {a_{QP}}

    Args:
        generator: (行立方体集, 列立方体集) -> 矩阵块
        level_window: 行列共同的层级窗口
        spatial_window: 空间窗口, 窗口外的元素视为 0
    """

    def __init__(self, generator: Generator, level_window: Tuple[int, int], spatial_window: Region, name: str = "matrix"):
        self.generator = generator
        self.level_window = (int(level_window[0]), int(level_window[1]))
        self.spatial_window = spatial_window
        self.name = name
        self._cubes: Optional[CubeSet] = None
        self._dense: Optional[np.ndarray] = None

    @property
    def cubes(self) -> CubeSet:
        if self._cubes is None:
            cubes: List[DyadicCube] = []
            for level in range(self.level_window[0], self.level_window[1] + 1):
                cubes.extend(enumerate_cubes(level, self.spatial_window))
            self._cubes = CubeSet.of(cubes)
        return self._cubes

    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = np.asarray(self.generator(self.cubes, self.cubes), dtype=float)
        return self._dense

    def truncation(self) -> Dict[str, Any]:
        return {
            "level_window": list(self.level_window),
            "spatial_window": [list(self.spatial_window.lower), list(self.spatial_window.upper)],
            "cubes": len(self.cubes),
        }

    @classmethod
    def identity(cls, level_window: Tuple[int, int], spatial_window: Region) -> "CubeMatrix":
        def generator(rows: CubeSet, cols: CubeSet) -> np.ndarray:
            same = rows.levels[:, None] == cols.levels[None, :]
            same &= np.all(rows.corners[:, None, :] == cols.corners[None, :, :], axis=-1)
            return same.astype(float)

        return cls(generator, level_window, spatial_window, name="identity")

    @classmethod
    def from_entry(cls, entry: Callable[[DyadicCube, DyadicCube], float], level_window, spatial_window, name="entry") -> "CubeMatrix":
        """由逐元素函数构造(逐对调用, 仅适合小窗口)"""
        def generator(rows: CubeSet, cols: CubeSet) -> np.ndarray:
            return np.array([[entry(Q, P) for P in cols.cubes] for Q in rows.cubes], dtype=float)

        return cls(generator, level_window, spatial_window, name=name)

    @classmethod
    def from_table(cls, table: Dict[Tuple[DyadicCube, DyadicCube], float], level_window, spatial_window, name="table") -> "CubeMatrix":
        return cls.from_entry(lambda Q, P: table.get((Q, P), 0.0), level_window, spatial_window, name=name)

    @classmethod
    def envelope_matrix(
        cls, spec: AlmostDiagSpec, level_window: Tuple[int, int], spatial_window: Region, seed: int = 0
    ) -> "CubeMatrix":
        """规范检验矩阵: C·包络·s(Q)s(P), 符号由立方体哈希决定"""
        def generator(rows: CubeSet, cols: CubeSet) -> np.ndarray:
            signs = cube_signs(rows, seed)[:, None] * cube_signs(cols, seed)[None, :]
            return spec.C * envelope(rows, cols, spec) * signs

        return cls(generator, level_window, spatial_window, name="envelope")


def compute_J(params: SpaceParams) -> float:
    """F 族 J = n/min(1,p,q), B 族 J = n/min(1,p)"""
    if params.family == "F":
        return params.n / min(1.0, params.p, params.q)
    return params.n / min(1.0, params.p)


def boundedness_thresholds(params: SpaceParams) -> Dict[str, float]:
    """有界性所需的 r1, r2, L 下界(严格不等式)"""
    J = compute_J(params)
    s, sp, sigma, n_p = params.s, params.s_prime, params.sigma, params.n_over_p
    if params.tilde:
        pos, neg = max(sigma, 0.0), min(sigma, 0.0)
        r1 = max(sp + pos, pos + s + sp - n_p)
        r2 = J - sp - neg
    else:
        r1 = max(sp, sigma + s + sp - n_p)
        r2 = J - sp
    return {"r1": r1, "r2": r2, "L": J, "J": J}


def verify_almost_diagonal(A: CubeMatrix, spec: AlmostDiagSpec) -> Dict[str, Any]:
    """在窗口内检查两种层级关系下的衰减, 返回最小可行常数"""
    cubes = A.cubes
    dense = np.abs(A.dense())
    env = envelope(cubes, cubes, spec)
    ratio = dense / env
    finer = cubes.sides[:, None] <= cubes.sides[None, :]
    c_fine = float(ratio[finer].max(initial=0.0))
    c_coarse = float(ratio[~finer].max(initial=0.0))
    fitted = max(c_fine, c_coarse)
    return {
        "pass": bool(fitted <= spec.C * (1.0 + 1e-12)),
        "C": fitted,
        "C_fine": c_fine,
        "C_coarse": c_coarse,
        "spec": spec.to_dict(),
        "truncation": A.truncation(),
    }


def _field_vector(A: CubeMatrix, c: CoeffField) -> np.ndarray:
    if c.n != A.cubes.corners.shape[1]:
        raise DimensionMismatchError(f"系数场维数 {c.n} 与矩阵维数不一致")
    position = {cube: i for i, cube in enumerate(A.cubes.cubes)}
    vector = np.zeros(len(A.cubes))
    for cube, value in c.items():
        if cube not in position:
            if value != 0.0:
                raise ValueError(f"系数场的立方体 {cube} 不在矩阵窗口内")
            continue
        vector[position[cube]] = value
    return vector


def _vector_field(A: CubeMatrix, vector: np.ndarray) -> CoeffField:
    entries = {cube: float(v) for cube, v in zip(A.cubes.cubes, vector) if v != 0.0}
    return CoeffField(entries, A.level_window, A.spatial_window, n=A.cubes.corners.shape[1])


def apply_matrix(
    A: CubeMatrix, c: CoeffField, split: bool = False, reference_level: Optional[int] = None
):
    """
    (Ac)(Q) = Σ_P a_{QP} c(P)

    split=True 时另返回相对参考层级 l(P)=2^{-reference_level} 的分解:
    A0: l(R) ≤ l(R') ≤ l(P); A1: l(R') < l(R) ≤ l(P); A2: l(R) ≤ l(P) < l(R');
    outside: l(R) > l(P) 的行。四部分之和等于 Ac。
    """
    vector = _field_vector(A, c)
    dense = A.dense()
    result = _vector_field(A, dense @ vector)
    if not split:
        return result

    ref = A.level_window[0] if reference_level is None else reference_level
    row = A.cubes.levels[:, None]
    col = A.cubes.levels[None, :]
    inside = row >= ref
    masks = {
        "A0": inside & (row >= col) & (col >= ref),
        "A1": inside & (col > row),
        "A2": inside & (col < ref),
        "outside": np.broadcast_to(~inside, dense.shape),
    }
    parts = {key: _vector_field(A, np.where(mask, dense, 0.0) @ vector) for key, mask in masks.items()}
    return result, parts


def _extremal_fields(level_window: Tuple[int, int], window: Region, x0: Sequence[float], seed: int) -> List[CoeffField]:
    """最细层常数(与列符号对齐), 含 x0 的最细立方体上的 δ, 最粗层常数"""
    lo, hi = level_window
    extremal = []
    for level in (hi, lo):
        cubes = CubeSet.of(enumerate_cubes(level, window))
        signs = cube_signs(cubes, seed)
        extremal.append(CoeffField(dict(zip(cubes.cubes, signs)), level_window, window, n=window.n))
    delta = base_chain(x0, (hi, hi))[0]
    if window.intersects(delta):
        extremal.insert(1, CoeffField({delta: 1.0}, level_window, window, n=window.n))
    return extremal


def plateau_verdict(ratios: Sequence[float], tolerance: float) -> Tuple[str, float]:
    """最后一步增长不超过 tolerance 判为 bounded"""
    if len(ratios) < 2 or ratios[-2] <= 0:
        return "bounded", 0.0
    growth = ratios[-1] / ratios[-2] - 1.0
    return ("bounded" if growth <= tolerance else "growing"), growth


def boundedness_harness(
    spec: Optional[AlmostDiagSpec],
    params: SpaceParams,
    harness: Optional[HarnessConfig] = None,
    truncation: Optional[TruncationConfig] = None,
    depths: Optional[Sequence[int]] = None,
    ensemble_size: Optional[int] = None,
) -> Dict[str, Any]:
    """
    在各截断深度上计算 max ‖Ac‖/‖c‖, 按平台判据给出 bounded/growing

    spec 为 None 时使用单位矩阵。随机场固定在最浅深度的层级上, 各深度共用。
    """
    harness = harness or HarnessConfig()
    truncation = truncation or TruncationConfig()
    depths = list(depths or harness.depths)
    size = ensemble_size or harness.ensemble_size
    window = Region.unit(params.n)
    rng = derive_rng(harness.seed, "almost_diag.ensemble")
    base = [random_field(rng, (0, depths[0]), window, harness.density, n=params.n) for _ in range(size)]

    ratios = []
    for depth in depths:
        level_window = (0, depth)
        if spec is None:
            A = CubeMatrix.identity(level_window, window)
        else:
            A = CubeMatrix.envelope_matrix(spec, level_window, window, seed=harness.seed)
        fields = [CoeffField(f.entries, level_window, window, n=params.n) for f in base]
        fields += _extremal_fields(level_window, window, params.x0, harness.seed)
        worst = 0.0
        for field_ in fields:
            denominator = space_norm(field_, params, truncation).value
            if denominator <= 0:
                continue
            numerator = space_norm(apply_matrix(A, field_), params, truncation).value
            worst = max(worst, numerator / denominator)
        ratios.append(worst)
        logger.debug(f"深度 {depth}: max ‖Ac‖/‖c‖ = {worst:.6g}")

    verdict, growth = plateau_verdict(ratios, harness.plateau_tolerance)
    return {
        "spec": spec.to_dict() if spec else "identity",
        "params": params.describe(),
        "depths": depths,
        "max_ratios": ratios,
        "growth": growth,
        "verdict": verdict,
        "seed": harness.seed,
        "ensemble_size": size,
        "truncation": {"outer_levels": truncation.outer_levels, "quadrature_refine": truncation.quadrature_refine},
    }


def bounded_spec(params: SpaceParams, margin: float = 2.0) -> AlmostDiagSpec:
    """满足有界性阈值(各加 margin)的规范参数"""
    th = boundedness_thresholds(params)
    return AlmostDiagSpec(r1=max(th["r1"], 0.0) + margin, r2=max(th["r2"], 0.0) + margin, L=th["L"] + margin)


def violating_spec(params: SpaceParams, deficit: float = 0.5, margin: float = 2.0) -> AlmostDiagSpec:
    """r2 比阈值低 deficit, 其余与 bounded_spec 相同"""
    good = bounded_spec(params, margin)
    r2 = boundedness_thresholds(params)["r2"] - deficit
    if r2 < 0:
        raise ValueError(f"阈值 r2 - {deficit} = {r2} 为负, 无法构造违反条件的矩阵")
    return AlmostDiagSpec(r1=good.r1, r2=r2, L=good.L, C=good.C)


def ad_harness(params: SpaceParams, harness: Optional[HarnessConfig] = None, truncation: Optional[TruncationConfig] = None) -> Dict[str, Any]:
    """同时运行满足阈值与违反 r2 阈值的两组检验"""
    bounded = boundedness_harness(bounded_spec(params), params, harness, truncation)
    violated = boundedness_harness(violating_spec(params), params, harness, truncation)
    return {
        "params": params.describe(),
        "thresholds": boundedness_thresholds(params),
        "bounded_run": bounded,
        "violated_run": violated,
        "pass": bounded["verdict"] == "bounded" and violated["verdict"] == "growing",
    }


def compose_check(
    spec_a: AlmostDiagSpec,
    spec_b: AlmostDiagSpec,
    depths: Sequence[int] = (6, 8),
    n: int = 1,
    epsilon: float = 0.5,
    tolerance: float = 0.05,
    seed: int = 0,
) -> Dict[str, Any]:
    """两个规范矩阵之积在 (min r1, min r2, L-n-ε) 下的拟合常数及其截断稳定性"""
    target = AlmostDiagSpec(
        r1=min(spec_a.r1, spec_b.r1),
        r2=min(spec_a.r2, spec_b.r2),
        L=min(spec_a.L, spec_b.L) - n - epsilon,
    )
    window = Region.unit(n)
    constants = []
    for depth in depths:
        A = CubeMatrix.envelope_matrix(spec_a, (0, depth), window, seed=seed)
        B = CubeMatrix.envelope_matrix(spec_b, (0, depth), window, seed=seed + 1)
        product = A.dense() @ B.dense()
        cubes = A.cubes
        constants.append(float((np.abs(product) / envelope(cubes, cubes, target)).max()))
    growth = constants[-1] / constants[-2] - 1.0 if len(constants) > 1 and constants[-2] > 0 else 0.0
    return {
        "target": target.to_dict(),
        "depths": list(depths),
        "fitted_C": constants,
        "growth": growth,
        "pass": bool(math.isfinite(constants[-1]) and growth <= tolerance),
    }
