"""
Littlewood-Paley 变换模块
自对偶带限对 (φ, ϕ=φ), 分块 φ_i * f, φ-变换系数, 合成以及函数空间范数

频率采用角频率 ξ = 2π·fftfreq(N, h); φ̂_j(ξ) = φ̂(2^{-j}ξ)。
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import special

from .coeff_field import CoeffField
from .config import TruncationConfig
from .dyadic import DyadicCube
from .engine import BlockNormEngine, NormResult, outer_norm
from .exceptions import DimensionMismatchError, NyquistError
from .params import SpaceParams
from .signal import SampledSignal


@dataclass(frozen=True)
class LPPair:
    """
    自对偶 Littlewood-Paley 对

    φ̂ 在 u = log2|ξ| ∈ [-1,0] 上为 sin(π/2·ν(u+1)), 在 [0,1] 上为 cos(π/2·ν(u)), 其余为 0,
    因此 Σ_j φ̂(2^{-j}ξ)^2 = 1 (ξ ≠ 0)。ν 默认是 C^∞ 指数型过渡函数;
    给出 smoothness_order 时改用正则化不完全 Beta 函数, 光滑阶有限。
    """
    smoothness_order: Optional[int] = None

    def __post_init__(self) -> None:
        if self.smoothness_order is not None and self.smoothness_order < 2:
            raise ValueError(f"smoothness_order 必须 ≥ 2: {self.smoothness_order}")

    def nu(self, x: np.ndarray) -> np.ndarray:
        """[0,1] 上从 0 单调升到 1 的过渡函数, ν(x) + ν(1-x) = 1"""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self.smoothness_order is not None:
            a = math.ceil(self.smoothness_order / 2)
            return special.betainc(a, a, x)
        with np.errstate(divide="ignore", over="ignore"):
            left = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
            right = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
        return left / (left + right)

    def phi_hat(self, radius: np.ndarray) -> np.ndarray:
        """φ̂ 作为 |ξ| 的函数"""
        radius = np.abs(np.asarray(radius, dtype=float))
        out = np.zeros_like(radius)
        positive = radius > 0
        u = np.full_like(radius, -np.inf)
        u[positive] = np.log2(radius[positive])
        lower = (u >= -1.0) & (u <= 0.0)
        upper = (u > 0.0) & (u <= 1.0)
        out[lower] = np.sin(0.5 * np.pi * self.nu(u[lower] + 1.0))
        out[upper] = np.cos(0.5 * np.pi * self.nu(u[upper]))
        return out

    def varphi_hat(self, radius: np.ndarray) -> np.ndarray:
        """对偶剖面, 自对偶选择下与 φ̂ 相同"""
        return self.phi_hat(radius)

    def level_multiplier(self, level: int, radius: np.ndarray) -> np.ndarray:
        return self.phi_hat(np.ldexp(np.asarray(radius, dtype=float), -level))

    def support(self) -> Tuple[float, float]:
        return 0.5, 2.0

    def lower_bound(self, lo: float = 3.0 / 5.0, hi: float = 5.0 / 3.0, samples: int = 20001) -> float:
        """|φ̂| 在 lo ≤ |ξ| ≤ hi 上的下界 c0"""
        return float(self.phi_hat(np.linspace(lo, hi, samples)).min())

    def partition_sum(self, radius: np.ndarray, levels: Tuple[int, int]) -> np.ndarray:
        """Σ_j φ̂_j ϕ̂_j 在给定频率上的值"""
        total = np.zeros_like(np.asarray(radius, dtype=float))
        for j in range(levels[0], levels[1] + 1):
            total = total + self.level_multiplier(j, radius) * self.varphi_hat(np.ldexp(np.asarray(radius, dtype=float), -j))
        return total


def build_lp_pair(smoothness_order: Optional[int] = None) -> LPPair:
    """构造自对偶 LP 对"""
    pair = LPPair(smoothness_order=smoothness_order)
    logger.debug(f"LP对已构造: order={smoothness_order or 'inf'}, c0={pair.lower_bound():.4f}")
    return pair


def frequency_radius(N: int, T: float, n: int = 1) -> np.ndarray:
    """网格角频率的模 |ξ|, 形状 (N,)*n"""
    axis = 2.0 * np.pi * np.fft.fftfreq(N, d=T / N)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.sqrt(sum(m ** 2 for m in mesh))


def default_levels(N: int, T: float) -> Tuple[int, int]:
    """覆盖最低非零频率且满足奈奎斯特条件的层级范围"""
    i_min = math.floor(math.log2(2.0 * np.pi / T))
    i_max = math.floor(math.log2(N / (2.0 * T)))
    return i_min, i_max


def check_levels(N: int, T: float, levels: Tuple[int, int]) -> None:
    """
    Raises:
        NyquistError: 2^{i_max} > N/(2T) 或层级粗于环面
    """
    lo, hi = levels
    if lo > hi:
        raise NyquistError(f"层级范围不合法: {levels}")
    if math.ldexp(1.0, hi) > N / (2.0 * T):
        raise NyquistError(f"层级 {hi} 超出奈奎斯特限制: 2^{hi} > N/(2T) = {N / (2.0 * T)}")
    if math.ldexp(1.0, -lo) > T:
        raise NyquistError(f"层级 {lo} 的立方体大于环面 T={T}")


def analyze_blocks(
    f: SampledSignal, pair: LPPair, levels: Optional[Tuple[int, int]] = None
) -> Dict[int, SampledSignal]:
    """逐层 φ_i * f, 实信号的块取实部"""
    levels = levels or default_levels(f.N, f.T)
    check_levels(f.N, f.T, levels)
    spectrum = np.fft.fftn(f.samples)
    radius = frequency_radius(f.N, f.T, f.n)
    blocks = {}
    for i in range(levels[0], levels[1] + 1):
        block = np.fft.ifftn(pair.level_multiplier(i, radius) * spectrum)
        blocks[i] = f.with_samples(block if f.is_complex else block.real)
    return blocks


def _stride(f_N: int, T: float, level: int) -> int:
    return int(round(f_N / (T * 2.0 ** level)))


def phi_transform_coeffs(
    f: SampledSignal, pair: LPPair, levels: Optional[Tuple[int, int]] = None
) -> CoeffField:
    """c(f)(P) = (ϕ_j * f)(x_P), 对 j 层所有环面立方体取值"""
    levels = levels or default_levels(f.N, f.T)
    blocks = analyze_blocks(f, pair, levels)
    entries = {}
    for level, block in blocks.items():
        stride = _stride(f.N, f.T, level)
        sampled = np.real(block.samples[(slice(None, None, stride),) * f.n])
        for idx in zip(*np.nonzero(sampled)):
            entries[DyadicCube(level, tuple(int(k) for k in idx))] = float(sampled[idx])
    return CoeffField(entries, levels, n=f.n, periodic=True, T=f.T)


def synthesize(c: CoeffField, pair: LPPair, N: Optional[int] = None) -> SampledSignal:
    """
    f = Σ_Q c(Q) φ_Q, φ_Q(x) = φ(2^j x - k), 在频域逐层累加

    Raises:
        NyquistError: 系数场层级超出网格
    """
    if not c.periodic:
        raise DimensionMismatchError("LP 合成需要周期系数场")
    T, n = c.T, c.n
    if N is None:
        N = int(round(2.0 * T * 2.0 ** c.level_window[1]))
    check_levels(N, T, c.level_window)
    radius = frequency_radius(N, T, n)
    h = T / N
    out = np.zeros((N,) * n, dtype=complex)
    for level, items in c.by_level().items():
        stride = _stride(N, T, level)
        impulses = np.zeros((N,) * n)
        for cube, amplitude in items:
            impulses[tuple(k * stride for k in cube.index)] = amplitude
        spectrum = np.fft.fftn(impulses) * pair.level_multiplier(level, radius)
        out += np.fft.ifftn(spectrum) * (2.0 ** (-level * n) / h ** n)
    return SampledSignal(out.real, T=T, n=n)


def lp_atom(cube: DyadicCube, pair: LPPair, N: int, T: float) -> SampledSignal:
    """
    直接用显式傅里叶级数求 φ_P 的采样值(不经过 FFT), 作为合成的独立对照
    """
    n, j = cube.n, cube.level
    axis_freq = 2.0 * np.pi * np.fft.fftfreq(N, d=T / N)
    x = np.arange(N) * (T / N)
    if n != 1:
        raise DimensionMismatchError("lp_atom 只用于 n=1")
    corner = cube.corner[0]
    weights = pair.level_multiplier(j, np.abs(axis_freq))
    phase = np.exp(1j * np.outer(x - corner, axis_freq))
    values = phase @ weights / T
    return SampledSignal((values * 2.0 ** (-j)).real, T=T, n=1)


def coefficient_kernel(level: int, pair: LPPair, N: int, T: float, n: int = 1) -> SampledSignal:
    """2^{-jn}(ϕ_j * φ_j)(x): f = φ_{Q0} 时 j 层系数为该核在 x_P - x_{Q0} 处的值"""
    radius = frequency_radius(N, T, n)
    h = T / N
    mult = pair.level_multiplier(level, radius) * pair.varphi_hat(np.ldexp(radius, -level))
    values = np.fft.ifftn(mult).real / h ** n * 2.0 ** (-level * n)
    return SampledSignal(values, T=T, n=n)


def block_engine(
    f: SampledSignal,
    params: SpaceParams,
    pair: LPPair,
    levels: Optional[Tuple[int, int]] = None,
) -> BlockNormEngine:
    """以 |φ_i * f| 在采样点上的值构造块范数引擎"""
    if params.n != f.n:
        raise DimensionMismatchError(f"信号维数 {f.n} 与参数维数 {params.n} 不一致")
    blocks = analyze_blocks(f, pair, levels)
    layers = {i: np.abs(b.samples) for i, b in blocks.items()}
    return BlockNormEngine(
        layers,
        node_level=f.grid_level,
        node_start=(0,) * f.n,
        params=params,
        node_offset=0.0,
        period_nodes=f.N,
    )


def function_space_norm(
    f: SampledSignal,
    params: SpaceParams,
    pair: LPPair,
    levels: Optional[Tuple[int, int]] = None,
    truncation: Optional[TruncationConfig] = None,
) -> NormResult:
    """
    ‖f‖_{A^s(E^{s'}_{pq})^σ_{x0}} (或加权版本) 由 |φ_i * f| 经与系数场相同的聚合引擎得到
    """
    truncation = truncation or TruncationConfig()
    levels = levels or default_levels(f.N, f.T)
    if not np.any(f.samples):
        return NormResult(value=0.0)
    engine = block_engine(f, params, pair, levels)
    chain_lo = levels[0] - truncation.outer_levels
    return outer_norm(
        engine,
        chain_levels=(chain_lo, levels[1]),
        p_levels=(chain_lo - 1, levels[1]),
        span=truncation.divergence_span,
        factor=truncation.divergence_factor,
    )
