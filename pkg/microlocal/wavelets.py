"""
小波模块
紧支撑正交小波(Daubechies 族)的滤波器、二进点精确取值、周期金字塔分析/合成

滤波器由 PyWavelets 提供; 变换本身采用显式约定
    a_j[k] = Σ_l h_l a_{j+1}[(2k+l) mod M],  d_j[k] = Σ_l g_l a_{j+1}[(2k+l) mod M],
与 φ_{j,k} = Σ_l h_l φ_{j+1,2k+l} 一致。系数场使用非单位化约定
c(Q) = l(Q)^{-n}<f, ψ_Q>, ψ_Q(x) = ψ(2^j x - k), 与金字塔输出相差 2^{jn/2}。
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pywt
from loguru import logger

from .coeff_field import CoeffField
from .dyadic import DyadicCube
from .exceptions import CalculationError, InsufficientBasisError, ResolutionError
from .signal import SampledSignal

# Daubechies 族的 Hölder 正则性指数
SMOOTHNESS_TABLE: Dict[int, float] = {
    1: 0.0,
    2: 0.55,
    3: 1.088,
    4: 1.618,
    5: 1.969,
    6: 2.189,
    7: 2.46,
    8: 2.761,
    9: 3.074,
    10: 3.361,
}

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class WaveletBasis:
    """紧支撑正交小波基"""
    name: str
    vanishing_moments: int
    smoothness: float
    decay: float
    h: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    @property
    def filter_length(self) -> int:
        return len(self.h)

    @property
    def support(self) -> Tuple[int, int]:
        """φ 与 ψ 的支撑 [0, 2N-1]"""
        return 0, self.filter_length - 1

    def filter_orthonormality_error(self) -> float:
        """max_k |Σ_l h_l h_{l+2k} - δ_k| 以及 g 的对应量"""
        worst = 0.0
        L = self.filter_length
        for filt in (self.h, self.g):
            corr = np.correlate(filt, filt, mode="full")
            center = L - 1
            even = corr[center % 2 :: 2]
            target = np.zeros_like(even)
            target[(center - center % 2) // 2] = 1.0
            worst = max(worst, float(np.max(np.abs(even - target))))
        cross = np.correlate(self.h, self.g, mode="full")
        worst = max(worst, float(np.max(np.abs(cross[(L - 1) % 2 :: 2]))))
        return worst

    def scaling_at_integers(self) -> np.ndarray:
        """φ(0), φ(1), ..., φ(2N-1)"""
        return _scaling_at_integers(self.name)

    def scaling_values(self, r: int) -> Tuple[np.ndarray, np.ndarray]:
        """φ 在 2^{-r}Z ∩ [0, 2N-1] 上的精确值"""
        values = self.scaling_at_integers()
        for level in range(1, r + 1):
            values = self._refine(values, level, self.h)
        x = np.arange(len(values)) * 2.0 ** (-r)
        return x, values

    def wavelet_values(self, r: int) -> Tuple[np.ndarray, np.ndarray]:
        """ψ 在 2^{-r}Z ∩ [0, 2N-1] 上的精确值, r ≥ 1"""
        r = max(r, 1)
        _, phi = self.scaling_values(r - 1)
        values = self._refine(phi, r, self.g)
        x = np.arange(len(values)) * 2.0 ** (-r)
        return x, values

    def _refine(self, coarse: np.ndarray, level: int, filt: np.ndarray) -> np.ndarray:
        """由 level-1 层的 φ 值求 level 层的 Σ_l √2 filt_l φ(2x - l)"""
        step = 1 << (level - 1)
        size = (self.filter_length - 1) * (1 << level) + 1
        out = np.zeros(size)
        for l, coef in enumerate(filt):
            start = l * step
            stop = min(size, start + len(coarse))
            out[start:stop] += SQRT2 * coef * coarse[: stop - start]
        return out

    def moments(self, max_order: int, r: int = 8) -> np.ndarray:
        """∫ψ x^γ, γ = 0..max_order, 由二进点和计算"""
        x, psi = self.wavelet_values(r)
        dx = 2.0 ** (-r)
        return np.array([np.sum(psi * x ** gamma) * dx for gamma in range(max_order + 1)])

    def describe(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "vanishing_moments": self.vanishing_moments,
            "smoothness": self.smoothness,
            "decay": "inf" if math.isinf(self.decay) else self.decay,
        }


@lru_cache(maxsize=None)
def _scaling_at_integers(name: str) -> np.ndarray:
    h = np.asarray(pywt.Wavelet(name).rec_lo, dtype=float)
    L = len(h)
    if L == 2:
        return np.array([1.0, 0.0])
    size = L - 2
    matrix = np.zeros((size, size))
    for i in range(1, L - 1):
        for t in range(1, L - 1):
            idx = 2 * i - t
            if 0 <= idx < L:
                matrix[i - 1, t - 1] = SQRT2 * h[idx]
    eigvals, eigvecs = np.linalg.eig(matrix)
    pick = int(np.argmin(np.abs(eigvals - 1.0)))
    if abs(eigvals[pick] - 1.0) > 1e-8:
        raise CalculationError(f"{name} 的细分矩阵没有特征值 1")
    vec = np.real(eigvecs[:, pick])
    vec = vec / vec.sum()
    values = np.zeros(L)
    values[1 : L - 1] = vec
    values.setflags(write=False)
    return values


def build_wavelet_basis(vanishing_moments: int) -> WaveletBasis:
    """
    构造具有指定消失矩的 Daubechies 正交小波基

    Raises:
        InsufficientBasisError: 消失矩不在 [1, 10] 内
    """
    if vanishing_moments not in SMOOTHNESS_TABLE:
        raise InsufficientBasisError(f"不支持的消失矩数: {vanishing_moments}, 可选 1..10")
    name = f"db{vanishing_moments}"
    wavelet = pywt.Wavelet(name)
    h = np.asarray(wavelet.rec_lo, dtype=float)
    g = np.asarray(wavelet.rec_hi, dtype=float)
    h.setflags(write=False)
    g.setflags(write=False)
    basis = WaveletBasis(
        name=name,
        vanishing_moments=vanishing_moments,
        smoothness=SMOOTHNESS_TABLE[vanishing_moments],
        decay=math.inf,
        h=h,
        g=g,
    )
    error = basis.filter_orthonormality_error()
    if error > 1e-10:
        raise CalculationError(f"{name} 滤波器不满足正交性: 误差 {error:.2e}")
    logger.debug(f"小波基已构造: {name}, 光滑性 {basis.smoothness}")
    return basis


def to_field_normalization(d: np.ndarray, level: int, n: int = 1) -> np.ndarray:
    """单位化金字塔系数 d = <f, ψ_{j,k}> 转为 c(Q) = l(Q)^{-n}<f, ψ_Q> = 2^{jn/2} d"""
    return np.asarray(d) * 2.0 ** (level * n / 2.0)


def from_field_normalization(c: np.ndarray, level: int, n: int = 1) -> np.ndarray:
    return np.asarray(c) * 2.0 ** (-level * n / 2.0)


def _filter_index(K: int, L: int, M: int) -> np.ndarray:
    return (2 * np.arange(K)[:, None] + np.arange(L)[None, :]) % M


def _analysis_step(a: np.ndarray, filt: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(a, axis, 0)
    M = moved.shape[0]
    idx = _filter_index(max(M // 2, 1), len(filt), M)
    out = np.einsum("l,kl...->k...", filt, moved[idx])
    return np.moveaxis(out, 0, axis)


def _synthesis_step(coef: np.ndarray, filt: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(coef, axis, 0)
    K = moved.shape[0]
    M = 2 * K
    L = len(filt)
    idx = _filter_index(K, L, M)
    contrib = filt[None, :, ...].reshape((1, L) + (1,) * (moved.ndim - 1)) * moved[:, None, ...]
    out = np.zeros((M,) + moved.shape[1:], dtype=np.result_type(moved, filt))
    np.add.at(out, idx.ravel(), contrib.reshape((K * L,) + moved.shape[1:]))
    return np.moveaxis(out, 0, axis)


def _circular_symbol(basis: WaveletBasis, M: int) -> np.ndarray:
    kernel = np.zeros(M)
    np.add.at(kernel, np.arange(basis.filter_length) % M, basis.scaling_at_integers())
    return np.fft.fft(kernel)


def prefilter(f: SampledSignal, basis: WaveletBasis) -> np.ndarray:
    """
    由点值求 m 层尺度系数: f(ih) = 2^{m/2} Σ_k a_k φ(i-k)

    Raises:
        CalculationError: 插值符号接近 0
    """
    symbol = _circular_symbol(basis, f.N)
    if np.min(np.abs(symbol)) < 1e-8:
        raise CalculationError(f"{basis.name} 的插值符号在 N={f.N} 时接近 0")
    scale = 2.0 ** (f.grid_level / 2.0)
    coeffs = np.asarray(f.samples, dtype=complex)
    for axis in range(f.n):
        spectrum = np.fft.fft(coeffs, axis=axis)
        view = [1] * f.n
        view[axis] = f.N
        coeffs = np.fft.ifft(spectrum / symbol.reshape(view), axis=axis)
    coeffs = coeffs / scale ** f.n
    return coeffs if f.is_complex else coeffs.real


def postfilter(a: np.ndarray, basis: WaveletBasis, T: float) -> SampledSignal:
    """由 m 层尺度系数求点值"""
    N = a.shape[0]
    n = a.ndim
    m = int(round(math.log2(N / T)))
    symbol = _circular_symbol(basis, N)
    values = np.asarray(a, dtype=complex)
    for axis in range(n):
        view = [1] * n
        view[axis] = N
        values = np.fft.ifft(np.fft.fft(values, axis=axis) * symbol.reshape(view), axis=axis)
    values = values * 2.0 ** (m * n / 2.0)
    return SampledSignal(values if np.iscomplexobj(a) else values.real, T=T, n=n)


def orientations(n: int) -> List[str]:
    """n 维张量小波的 2^n-1 个方向, 如 n=2 时 ad, da, dd"""
    return ["".join(p) for p in itertools.product("ad", repeat=n) if "d" in p]


def default_wavelet_levels(f: SampledSignal) -> Tuple[int, int]:
    return f.torus_level, f.grid_level - 1


def _check_levels(f_level: int, torus_level: int, levels: Tuple[int, int]) -> None:
    lo, hi = levels
    if lo > hi:
        raise ResolutionError(f"层级范围不合法: {levels}")
    if hi + 1 > f_level:
        raise ResolutionError(f"网格层级 {f_level} 无法分辨小波层级 {hi}")
    if lo < torus_level:
        raise ResolutionError(f"层级 {lo} 的立方体大于环面")


def _cascade(f: SampledSignal, basis: WaveletBasis, levels: Tuple[int, int]) -> Tuple[Dict[int, Dict[str, np.ndarray]], np.ndarray]:
    _check_levels(f.grid_level, f.torus_level, levels)
    approx = prefilter(f, basis)
    details: Dict[int, Dict[str, np.ndarray]] = {}
    for level in range(f.grid_level - 1, levels[0] - 1, -1):
        bands = {"": approx}
        for axis in range(f.n):
            split = {}
            for key, arr in bands.items():
                split[key + "a"] = _analysis_step(arr, basis.h, axis)
                split[key + "d"] = _analysis_step(arr, basis.g, axis)
            bands = split
        approx = bands.pop("a" * f.n)
        if level <= levels[1]:
            details[level] = bands
    return details, approx


def dwt_analyze_all(
    f: SampledSignal, basis: WaveletBasis, levels: Optional[Tuple[int, int]] = None
) -> Dict[str, CoeffField]:
    """各方向的小波系数场 c(Q) = l(Q)^{-n}<f, ψ^{(i)}_Q>"""
    levels = levels or default_wavelet_levels(f)
    details, approx = _cascade(f, basis, levels)
    if np.max(np.abs(approx), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(f.samples)))):
        logger.debug(f"层级 {levels[0]} 的尺度部分未放入系数场: max|a|={np.max(np.abs(approx)):.3e}")
    fields: Dict[str, CoeffField] = {}
    for key in orientations(f.n):
        entries = {}
        for level, bands in details.items():
            coeffs = to_field_normalization(bands[key], level, f.n)
            for idx in zip(*np.nonzero(coeffs)):
                entries[DyadicCube(level, tuple(int(k) for k in idx))] = float(np.real(coeffs[idx]))
        fields[key] = CoeffField(entries, levels, n=f.n, periodic=True, T=f.T)
    return fields


def dwt_analyze(
    f: SampledSignal,
    basis: WaveletBasis,
    levels: Optional[Tuple[int, int]] = None,
    orientation: Optional[str] = None,
) -> CoeffField:
    """
    小波系数场, 使用 c(Q) = l(Q)^{-n}<f, ψ_Q> 约定

    Raises:
        ResolutionError: 网格无法分辨最细层级
    """
    fields = dwt_analyze_all(f, basis, levels)
    key = orientation or ("d" if f.n == 1 else None)
    if key not in fields:
        raise ValueError(f"n={f.n} 时必须指定方向, 可选: {sorted(fields)}")
    return fields[key]


def dwt_synthesize(
    c: Union[CoeffField, Dict[str, CoeffField]],
    basis: WaveletBasis,
    N: Optional[int] = None,
) -> SampledSignal:
    """f = Σ c(Q)ψ_Q 在网格点上的精确值"""
    fields = c if isinstance(c, dict) else None
    sample_field = next(iter(fields.values())) if fields else c
    n, T = sample_field.n, sample_field.T
    if not sample_field.periodic:
        raise ResolutionError("小波合成需要周期系数场")
    if fields is None:
        if n != 1:
            raise ValueError("n>1 时需要按方向给出系数场字典")
        fields = {"d": c}
    lo = min(f.level_window[0] for f in fields.values())
    hi = max(f.level_window[1] for f in fields.values())
    if N is None:
        N = int(round(T * 2.0 ** (hi + 1)))
    m = int(round(math.log2(N / T)))
    _check_levels(m, -int(round(math.log2(T))), (lo, hi))

    K = int(round(T * 2.0 ** lo))
    approx = np.zeros((K,) * n)
    for level in range(lo, m):
        K = int(round(T * 2.0 ** level))
        bands = {"a" * n: approx}
        for key in orientations(n):
            arr = np.zeros((K,) * n)
            field_ = fields.get(key)
            if field_ is not None:
                for cube, value in field_.by_level().get(level, []):
                    arr[cube.index] = value
            bands[key] = from_field_normalization(arr, level, n)
        for axis in range(n - 1, -1, -1):
            merged = {}
            for key, arr in bands.items():
                prefix = key[:axis]
                if key[axis] == "a":
                    merged[prefix + key[axis + 1 :]] = merged.get(prefix + key[axis + 1 :], 0) + _synthesis_step(arr, basis.h, axis)
                else:
                    merged[prefix + key[axis + 1 :]] = merged.get(prefix + key[axis + 1 :], 0) + _synthesis_step(arr, basis.g, axis)
            bands = merged
        approx = bands[""]
    return postfilter(approx, basis, T)


def coefficient_energy(c: CoeffField) -> float:
    """Σ |c(Q)|^2 l(Q)^n, 对均值为零的信号等于尺度系数的 ℓ^2 能量"""
    return float(sum(v * v * cube.side ** c.n for cube, v in c.items()))


def check_basis_for(basis: WaveletBasis, required_r: float, required_L: float = 0.0) -> None:
    """
    Raises:
        InsufficientBasisError: 光滑性或消失矩不超过所需阶数
    """
    usable = min(basis.smoothness, float(basis.vanishing_moments))
    if usable <= required_r or basis.decay <= required_L:
        raise InsufficientBasisError(
            f"{basis.name} 的光滑性 {basis.smoothness} / 消失矩 {basis.vanishing_moments} 不足以覆盖所需 r > {required_r:.3f}"
        )
