"""
原子与分子模块
光滑分子/原子/小波的衰减条件检验, Gram 矩阵衰减检验以及截断原子分解

所有函数都在 [0,T) 环面上采样(n=1); 偏移 x - x_Q 按环面取最短代表。
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import stats

from .almost_diag import AlmostDiagSpec, CubeMatrix, CubeSet, verify_almost_diagonal
from .coeff_field import CoeffField
from .dyadic import DyadicCube, Region
from .exceptions import DimensionMismatchError, ResolutionError
from .lp_transform import LPPair, synthesize
from .signal import SampledSignal
from .wavelets import WaveletBasis, check_basis_for, dwt_synthesize

FrameKind = Literal["atom", "molecule", "wavelet"]


@dataclass(frozen=True)
class MoleculeSpec:
    """(r1, r2, L)-光滑分子, 衰减指数 L2 > n + r2"""
    r1: int
    r2: int
    L: float
    L2: float
    n: int = 1
    C: Optional[float] = None

    def __post_init__(self) -> None:
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError(f"r1, r2 必须非负: ({self.r1}, {self.r2})")
        if self.L <= self.n:
            raise ValueError(f"L 必须大于 n: L={self.L}, n={self.n}")
        if self.L2 <= self.n + self.r2:
            raise ValueError(f"L2 必须大于 n + r2: L2={self.L2}, n+r2={self.n + self.r2}")

    def to_dict(self) -> Dict[str, Any]:
        return {"r1": self.r1, "r2": self.r2, "L": self.L, "L2": self.L2, "n": self.n, "C": self.C}


@dataclass(frozen=True)
class AtomSpec:
    """(r1, r2)-光滑原子, 支撑在 3Q 内"""
    r1: int
    r2: int
    C: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"r1": self.r1, "r2": self.r2, "C": self.C}


def wavelet_spec(r: int, L: float, n: int = 1) -> MoleculeSpec:
    """(r, L)-光滑小波的条件等同于 r1=r2=r 的分子, 衰减指数 L0 > n + r"""
    return MoleculeSpec(r1=r, r2=r, L=L, L2=max(L, n + r + 1.0), n=n)


def _wrap(d: np.ndarray, T: float) -> np.ndarray:
    return (d + 0.5 * T) % T - 0.5 * T


def _offsets(g: SampledSignal, Q: DyadicCube) -> np.ndarray:
    """x - x_Q, 以 |g|^2 的环面重心为切口对侧取代表"""
    x = g.coords()
    weight = np.abs(g.samples) ** 2
    phase = np.sum(weight * np.exp(2j * np.pi * x / g.T))
    anchor = (np.angle(phase) * g.T / (2.0 * np.pi)) % g.T if abs(phase) > 0 else Q.corner[0]
    return _wrap(x - anchor, g.T) + _wrap(np.array(anchor - Q.corner[0]), g.T)


def _central_difference(values: np.ndarray, step: float, stride: int) -> np.ndarray:
    return (np.roll(values, -stride) - np.roll(values, stride)) / (2.0 * stride * step)


def finite_derivative(values: np.ndarray, step: float, order: int) -> np.ndarray:
    """周期中心差分的 Richardson 外推 (4D_h - D_2h)/3, 重复 order 次"""
    out = np.asarray(values, dtype=float)
    for _ in range(order):
        out = (4.0 * _central_difference(out, step, 1) - _central_difference(out, step, 2)) / 3.0
    return out


def _derivative_constants(
    values: np.ndarray, step: float, y: np.ndarray, side: float, orders: Sequence[int], L: Optional[float]
) -> Dict[int, float]:
    envelope = 1.0 if L is None else (1.0 + np.abs(y)) ** L
    return {
        gamma: float(np.max(np.abs(finite_derivative(values, step, gamma)) * side ** gamma * envelope))
        for gamma in orders
    }


def verify_frame_decay(
    g: SampledSignal,
    kind: FrameKind,
    spec,
    Q: DyadicCube,
    moment_tol: float = 1e-8,
    check_stability: bool = False,
    growth_limit: float = 1.5,
) -> Dict[str, Any]:
    """
    在网格上检查分子/原子/小波条件, 返回各条件的最小可行常数

    check_stability=True 时比较步长 h 与 4h 的导数常数, 增长超过 growth_limit 判为失败
    (有限差分在导数不存在时仍给出有限值)。

    Raises:
        ResolutionError: 每个 l(Q) 内的采样点不足以分辨 r1 阶差分
    """
    if g.n != 1 or Q.n != 1:
        raise DimensionMismatchError("verify_frame_decay 只支持 n=1")
    side = Q.side
    points = side / g.h
    required = 8 * (spec.r1 + 1) if check_stability else 2 * (spec.r1 + 2)
    if points < required:
        raise ResolutionError(f"每个 l(Q) 只有 {points:g} 个采样点, r1={spec.r1} 至少需要 {required}")

    values = np.real(g.samples).astype(float)
    d = _offsets(g, Q)
    y = d / side
    report: Dict[str, Any] = {"kind": kind, "cube": str(Q), "spec": spec.to_dict()}
    finite = True

    if kind == "atom":
        scale = np.max(np.abs(values), initial=0.0)
        outside = (d < -side) | (d > 2.0 * side)
        leak = float(np.max(np.abs(values[outside]), initial=0.0))
        report["support_ok"] = bool(leak <= 1e-12 * max(scale, 1e-300))
        report["support_leak"] = leak
        orders = list(range(0, spec.r1 + 1))
        derivative = _derivative_constants(values, g.h, y, side, orders, None)
    else:
        decay = float(np.max(np.abs(values) * (1.0 + np.abs(y)) ** max(spec.L, spec.L2)))
        report["decay_C"] = decay
        finite &= math.isfinite(decay)
        orders = list(range(1, spec.r1 + 1))
        derivative = _derivative_constants(values, g.h, y, side, orders, spec.L)
    report["derivative_C"] = {str(k): v for k, v in derivative.items()}
    finite &= all(math.isfinite(v) for v in derivative.values())

    moments = {}
    for gamma in range(spec.r2):
        signed = abs(float(np.sum(y ** gamma * values)))
        total = float(np.sum(np.abs(y) ** gamma * np.abs(values)))
        moments[str(gamma)] = signed / total if total > 0 else 0.0
    report["moments"] = moments
    report["moments_ok"] = all(v <= moment_tol for v in moments.values())

    passed = report["moments_ok"] and finite and report.get("support_ok", True)
    if check_stability:
        coarse = _derivative_constants(
            values[::4], 4.0 * g.h, y[::4], side, orders, None if kind == "atom" else spec.L
        )
        growth = {str(k): derivative[k] / coarse[k] if coarse[k] > 0 else 1.0 for k in orders}
        report["derivative_growth"] = growth
        report["stable"] = all(v <= growth_limit for v in growth.values())
        passed &= report["stable"]

    fitted = [v for v in derivative.values()] + ([report["decay_C"]] if "decay_C" in report else [])
    report["C"] = max(fitted) if fitted else 0.0
    report["pass"] = bool(passed)
    return report


def _bump(y: np.ndarray) -> np.ndarray:
    """(-1,1) 上的 exp(-1/(1-y^2))"""
    out = np.zeros_like(y, dtype=float)
    inside = np.abs(y) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
    return out


def _moment_killer(y: np.ndarray, weight: np.ndarray, r2: int) -> np.ndarray:
    """首一多项式 p (次数 r2), 使 ∫ y^γ p(y) weight(y) = 0 对 γ < r2 离散成立"""
    if r2 == 0:
        return np.ones_like(y)
    powers = np.vstack([y ** k for k in range(r2 + 1)])
    gram = np.array([[np.sum(y ** (a + b) * weight) for b in range(r2)] for a in range(r2)])
    rhs = -np.array([np.sum(y ** (a + r2) * weight) for a in range(r2)])
    coeffs = np.linalg.solve(gram, rhs)
    return powers[r2] + coeffs @ powers[:r2]


def atom_from_bump(Q: DyadicCube, r2: int, N: int, T: float = 1.0) -> SampledSignal:
    """以 Q 中心的光滑鼓包乘以消去低阶矩的多项式构造原子, 支撑在 3Q 内, sup = 1"""
    grid = SampledSignal.zeros(N, T)
    x = grid.coords()
    y = _wrap(x - Q.center[0], T) / (1.5 * Q.side)
    weight = _bump(y)
    values = weight * _moment_killer(y, weight, r2)
    peak = np.max(np.abs(values))
    if peak == 0:
        raise ResolutionError(f"网格无法分辨立方体 {Q}")
    return grid.with_samples(values / peak)


# ---------------------------------------------------------------- Gram 衰减


@dataclass(frozen=True)
class GramFamily:
    """
    一族以二进立方体为指标的函数: template(level) 为角点在 0 的 j 层采样

    Args:
        support: 以 l(P) 为单位的支撑长度(非紧支撑的族取有效宽度)
        basis: 小波族对应的基, 用于光滑性检查; LP 族为 None
    """
    name: str
    template: Callable[[int, int, float], np.ndarray]
    support: float
    basis: Optional[WaveletBasis] = None


# φ_P 不是紧支撑的, 距离衰减从该宽度之外开始拟合
LP_EFFECTIVE_WIDTH = 4.0


def lp_family(pair: LPPair) -> GramFamily:
    def template(level: int, N: int, T: float) -> np.ndarray:
        c = CoeffField.single(DyadicCube(level, (0,)), 1.0, (level, level), periodic=True, T=T)
        return synthesize(c, pair, N).samples

    return GramFamily("lp", template, LP_EFFECTIVE_WIDTH)


def wavelet_family(basis: WaveletBasis) -> GramFamily:
    def template(level: int, N: int, T: float) -> np.ndarray:
        c = CoeffField.single(DyadicCube(level, (0,)), 1.0, (level, level), periodic=True, T=T)
        return dwt_synthesize(c, basis, N).samples

    return GramFamily(basis.name, template, float(basis.support[1]), basis)


class GramTable:
    """所有层级对的互相关 corr_{j,i}[m] = <φ_{(j,0)}(· - m h), ψ_{(i,0)}>"""

    def __init__(self, phi: GramFamily, psi: GramFamily, levels: Tuple[int, int], N: int, T: float):
        self.levels = levels
        self.N, self.T, self.h = N, T, T / N
        phi_hat = {j: np.fft.fft(phi.template(j, N, T)) for j in range(levels[0], levels[1] + 1)}
        psi_hat = {i: np.fft.fft(psi.template(i, N, T)) for i in range(levels[0], levels[1] + 1)}
        self.corr = {
            (j, i): np.fft.ifft(np.conj(phi_hat[j]) * psi_hat[i]).real * self.h
            for j in phi_hat
            for i in psi_hat
        }

    def pairings(self, rows: CubeSet, cols: CubeSet) -> np.ndarray:
        """<φ_P, ψ_R>, 行为 P 列为 R"""
        out = np.zeros((len(rows), len(cols)))
        shift = np.rint((rows.corners[:, None, 0] - cols.corners[None, :, 0]) / self.h).astype(np.int64) % self.N
        for (j, i), corr in self.corr.items():
            mask = (rows.levels[:, None] == j) & (cols.levels[None, :] == i)
            out[mask] = corr[shift[mask]]
        return out


def _gram_constants(table: GramTable, cubes: CubeSet, r1: float, r2: float, L: float) -> Dict[str, Any]:
    pair = np.abs(table.pairings(cubes, cubes))
    lp, lr = cubes.sides[:, None], cubes.sides[None, :]
    dist = np.abs(cubes.corners[:, None, 0] - cubes.corners[None, :, 0])
    finer = lp <= lr
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = pair / lp / ((lp / lr) ** r1 * (1.0 + dist / lr) ** (-L))
        c2 = pair / lr / ((lr / lp) ** r2 * (1.0 + dist / lp) ** (-L))
    return {
        "C1": float(np.max(np.where(finer, c1, 0.0))),
        "C2": float(np.max(np.where(finer, 0.0, c2), initial=0.0)),
        "pairs": int(pair.size),
    }


def _window_cubes(levels: Tuple[int, int], width: float) -> CubeSet:
    cubes = []
    for j in range(levels[0], levels[1] + 1):
        count = int(round(width * 2.0 ** j))
        cubes.extend(DyadicCube(j, (k,)) for k in range(count))
    return CubeSet.of(cubes)


def _distance_decay(
    table: GramTable, level: int, start_cubes: float, max_distance: float, floor: float = 1e-12
) -> Optional[float]:
    """
    同层 (j, j) 配对在二进距离区间上的最大值对距离的对数斜率(取负)

    区间从 start_cubes·l(P) 开始; 两族支撑重叠的范围内配对不衰减, 不参与拟合。
    """
    corr = np.abs(table.corr[(level, level)])
    side = math.ldexp(1.0, -level)
    shifts = np.arange(table.N) * table.h
    dist = np.minimum(shifts, table.T - shifts)
    peak = corr.max()
    xs, ys = [], []
    start = max(start_cubes, 2.0) * side
    while start * 2.0 <= max_distance:
        band = (dist >= start) & (dist < 2.0 * start)
        value = corr[band].max(initial=0.0)
        if value > floor * peak:
            xs.append(math.log2(start))
            ys.append(math.log2(value))
        start *= 2.0
    if len(xs) < 2:
        return None
    return -float(stats.linregress(xs, ys).slope)


def gram_decay_check(
    phi: GramFamily,
    psi: GramFamily,
    r1: float,
    r2: float,
    L: float,
    levels: Tuple[int, int] = (0, 6),
    T: float = 16.0,
    N: int = 1 << 13,
    tolerance: float = 0.05,
    table: Optional[GramTable] = None,
) -> Dict[str, Any]:
    """
    拟合 l(P)^{-n}|<φ_P, ψ_R>| 与 l(R)^{-n}|<φ_P, ψ_R>| 两个不等式的最小常数,
    并检查空间窗口由 T/8 加倍到 T/4 时常数增长不超过 tolerance

    P 细于 R 时衰减阶 r1 由 ψ 的光滑性提供, R 细于 P 时 r2 由 φ 的光滑性提供。

    Raises:
        InsufficientBasisError: 小波族的光滑性或消失矩不超过对应的阶
    """
    if psi.basis is not None:
        check_basis_for(psi.basis, r1)
    if phi.basis is not None:
        check_basis_for(phi.basis, r2)
    table = table or GramTable(phi, psi, levels, N, T)
    levels, N, T = table.levels, table.N, table.T
    small = _gram_constants(table, _window_cubes(levels, T / 8.0), r1, r2, L)
    large_cubes = _window_cubes(levels, T / 4.0)
    large = _gram_constants(table, large_cubes, r1, r2, L)
    growth = max(
        large[key] / small[key] - 1.0 if small[key] > 0 else 0.0 for key in ("C1", "C2")
    )
    exponent = _distance_decay(table, levels[1], phi.support + psi.support, T / 2.0)

    diag = np.abs(table.pairings(large_cubes, large_cubes))
    identity = (large_cubes.levels[:, None] == large_cubes.levels[None, :]) & (
        large_cubes.corners[:, None, 0] == large_cubes.corners[None, :, 0]
    )
    off_diagonal = float(np.max(np.where(identity, 0.0, diag)))

    finite = math.isfinite(large["C1"]) and math.isfinite(large["C2"])
    logger.debug(f"Gram 检验 {phi.name}/{psi.name}: C1={large['C1']:.4g}, C2={large['C2']:.4g}, 增长 {growth:.3%}")
    return {
        "phi": phi.name,
        "psi": psi.name,
        "orders": {"r1": r1, "r2": r2, "L": L},
        "levels": list(levels),
        "T": T,
        "N": N,
        "windows": {"T/8": small, "T/4": large},
        "C1": large["C1"],
        "C2": large["C2"],
        "window_growth": growth,
        "distance_decay_exponent": exponent,
        "distance_decay_ok": exponent is None or exponent >= L + math.log2(1.0 - tolerance),
        "off_diagonal_max": off_diagonal,
        "pass": bool(finite and growth <= tolerance),
    }


def gram_matrix(table: GramTable, width: float) -> CubeMatrix:
    """a_{PR} = l(P)^{-n}<φ_P, ψ_R> 作为立方体矩阵"""
    def generator(rows: CubeSet, cols: CubeSet) -> np.ndarray:
        return table.pairings(rows, cols) / rows.sides[:, None]

    return CubeMatrix(generator, table.levels, Region.unit(1, width), name="gram")


def verify_gram_matrix(
    table: GramTable, r1: float, r2: float, L: float, width: float, C: float = math.inf
) -> Dict[str, Any]:
    """Gram 矩阵在 (r1, r2+n, L) 下的几乎对角常数"""
    spec = AlmostDiagSpec(r1=r1, r2=r2 + 1, L=L, C=C)
    return verify_almost_diagonal(gram_matrix(table, width), spec)


# ---------------------------------------------------------------- 原子分解


@dataclass(frozen=True, eq=False)
class AtomDescriptor:
    """原子 a_Q 的局部采样: samples 从网格下标 offset 起环绕放置"""
    cube: DyadicCube
    coefficient: float
    r1: int
    r2: int
    offset: int
    samples: np.ndarray = field(repr=False)

    def place(self, N: int) -> np.ndarray:
        out = np.zeros(N)
        index = (self.offset + np.arange(len(self.samples))) % N
        np.add.at(out, index, self.samples)
        return out

    def to_signal(self, N: int, T: float) -> SampledSignal:
        return SampledSignal(self.place(N), T=T)


def reconstruct(atoms: Sequence[AtomDescriptor], N: int, T: float) -> SampledSignal:
    """Σ c'(Q) a_Q"""
    out = np.zeros(N)
    for atom in atoms:
        out += atom.coefficient * atom.place(N)
    return SampledSignal(out, T=T)


def _partition(pair: LPPair, y: np.ndarray) -> np.ndarray:
    """θ(y) = H(y) - H(y-1), H 在 [-1/2, 1/2] 上由 0 升到 1; Σ_k θ(y-k) = 1"""
    def step(t: np.ndarray) -> np.ndarray:
        return pair.nu(t + 0.5)

    return step(y) - step(y - 1.0)


def _correction(y: np.ndarray, values: np.ndarray, r2: int, cond_limit: float) -> Tuple[np.ndarray, int]:
    """以 y^k b(y) 为基消去 values 的前 r2 阶矩, 条件数过大时降低 r2"""
    weight = _bump(2.0 * (y - 0.5))
    while r2 > 0:
        basis = np.vstack([y ** k * weight for k in range(r2)])
        moments = np.vstack([y ** k for k in range(r2)])
        gram = moments @ basis.T
        if np.linalg.cond(gram) <= cond_limit:
            target = moments @ values
            return np.linalg.solve(gram, target) @ basis, r2
        r2 -= 1
    return np.zeros_like(values), 0


def atomic_decompose(
    c: CoeffField,
    pair: LPPair,
    N: Optional[int] = None,
    r1: int = 2,
    r2: int = 2,
    cond_limit: float = 1e12,
) -> Tuple[List[AtomDescriptor], CoeffField]:
    """
    把 synthesize(c) 改写为 Σ c'(Q) a_Q

    由细到粗逐层: 该层的合成加上上一层的进位, 用单位分解 θ_Q 切成局部片段,
    每个片段减去一个消去前 r2 阶矩的光滑修正, 修正量进位到更粗一层。
    最粗层(以及立方体数少于 4 的层)不做矩修正。c'(Q) = sup|片段|。

    Raises:
        DimensionMismatchError: 非周期或 n>1
        ResolutionError: 每个最细立方体少于 8 个采样点
    """
    if not c.periodic or c.n != 1:
        raise DimensionMismatchError("原子分解需要 n=1 的周期系数场")
    T = c.T
    lo, hi = c.level_window
    if N is None:
        N = int(round(T * 2.0 ** (hi + 3)))
    h = T / N
    if math.ldexp(1.0, -hi) / h < 8:
        raise ResolutionError(f"N={N} 时层级 {hi} 每个立方体不足 8 个采样点")

    atoms: List[AtomDescriptor] = []
    coefficients: Dict[DyadicCube, float] = {}
    if c.is_zero():
        return atoms, CoeffField({}, c.level_window, periodic=True, T=T)

    x = np.arange(N) * h
    by_level = c.by_level()
    carry = np.zeros(N)
    degraded = r2
    for level in range(hi, lo - 1, -1):
        items = by_level.get(level, [])
        current = carry.copy()
        if items:
            current += synthesize(CoeffField(dict(items), (level, level), periodic=True, T=T), pair, N).samples
        carry = np.zeros(N)
        if not np.any(current):
            continue
        side = math.ldexp(1.0, -level)
        count = int(round(T / side))
        width = int(round(side / h))
        level_r2 = 0 if (level == lo or count < 4) else r2
        for k in range(count):
            start = (k - 1) * width
            index = np.arange(start, start + 3 * width) % N
            y = (np.arange(start, start + 3 * width) * h - k * side) / side
            piece = _partition(pair, y) * current[index]
            correction, used = _correction(y, piece, level_r2, cond_limit)
            if used < level_r2 and used < degraded:
                degraded = used
                logger.warning(f"层级 {level} 的矩修正条件数过大, r2 降为 {used}")
            piece = piece - correction
            np.add.at(carry, index, correction)
            peak = float(np.max(np.abs(piece), initial=0.0))
            if peak <= 1e-14:
                continue
            cube = DyadicCube(level, (k,))
            coefficients[cube] = peak
            atoms.append(
                AtomDescriptor(cube, peak, r1, used if level_r2 else 0, int(index[0]), piece / peak)
            )

    logger.debug(f"原子分解完成: {len(atoms)} 个原子, 层级 {c.level_window}")
    return atoms, CoeffField(coefficients, c.level_window, periodic=True, T=T)
