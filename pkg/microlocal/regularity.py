"""
点态正则性模块
已知点态正则性的测试信号, 小波系数的求积对照, 以及 (s', σ) 平面上的 2-微局部边界扫描
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy import stats

from .almost_diag import compute_J
from .coeff_field import CoeffField, space_norm
from .config import TruncationConfig
from .dyadic import DyadicCube
from .exceptions import OutputError, QuadratureError, SignalSpecError
from .lp_transform import LPPair
from .params import SpaceParams
from .signal import SampledSignal
from .wavelets import WaveletBasis, check_basis_for, dwt_analyze

SignalKind = Literal["cusp", "chirp", "step", "smooth_bump"]


class TestSignalSpec(BaseModel):
    """测试信号: 以 x0 为中心, 半径 radius 的光滑截断"""
    __test__ = False

    kind: SignalKind = "cusp"
    alpha: float = Field(default=0.5, description="cusp/chirp 的指数 α")
    beta: float = Field(default=1.0, description="chirp 的振荡指数 β")
    x0: float = 0.5
    radius: float = Field(default=0.25, gt=0)
    mean_zero: bool = True

    class Config:
        extra = "forbid"
        frozen = True

    @model_validator(mode="after")
    def _check_exponents(self) -> "TestSignalSpec":
        if self.kind in ("cusp", "chirp") and self.alpha <= 0:
            raise ValueError(f"{self.kind} 需要 α > 0: {self.alpha}")
        if self.kind == "chirp" and self.beta <= 0:
            raise ValueError(f"chirp 需要 β > 0: {self.beta}")
        return self


_PROFILE = LPPair()


def cutoff(distance: np.ndarray, radius: float) -> np.ndarray:
    """|d| ≤ R/2 时为 1, |d| ≥ R 时为 0, 中间是 C^∞ 过渡"""
    t = (np.abs(distance) - 0.5 * radius) / (0.5 * radius)
    return 1.0 - _PROFILE.nu(t)


def signal_values(spec: TestSignalSpec, x: np.ndarray, T: float = 1.0) -> np.ndarray:
    """连续信号在任意点上的值(未做均值投影), 距离取环面代表"""
    d = (np.asarray(x, dtype=float) - spec.x0 + 0.5 * T) % T - 0.5 * T
    r = np.abs(d)
    window = cutoff(d, spec.radius)
    if spec.kind == "cusp":
        return r ** spec.alpha * window
    if spec.kind == "chirp":
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = np.where(r > 0, np.sin(np.where(r > 0, r, 1.0) ** (-spec.beta)), 0.0)
        return r ** spec.alpha * phase * window
    if spec.kind == "step":
        return (d >= 0).astype(float) * window
    return window


def _check_margin(spec: TestSignalSpec, T: float, margin: float) -> None:
    if spec.radius > 0.5 * T - margin * T:
        raise SignalSpecError(f"截断半径 {spec.radius} 超出环面内部边距 (T={T}, margin={margin})")


def synth_signal(spec: TestSignalSpec, N: int, T: float = 1.0, margin: float = 0.05) -> SampledSignal:
    """
    Raises:
        SignalSpecError: 截断半径超出 T/2 - margin·T
    """
    _check_margin(spec, T, margin)
    f = SampledSignal.from_function(lambda x: signal_values(spec, x, T), N, T)
    return f.mean_zero() if spec.mean_zero else f


# ---------------------------------------------------------------- 求积对照


def _dyadic_sums(spec: TestSignalSpec, ks: np.ndarray, level: int, t: np.ndarray, psi: np.ndarray, r: int, T: float) -> np.ndarray:
    """Σ_m ψ(t_m) f(2^{-j}(k + t_m)) 2^{-r}, 按块计算以限制内存"""
    chunk = max(1, (1 << 22) // len(t))
    out = np.empty(len(ks))
    for start in range(0, len(ks), chunk):
        block = ks[start : start + chunk]
        x = (block[:, None] + t[None, :]) * 2.0 ** (-level)
        out[start : start + chunk] = (signal_values(spec, x, T) @ psi) * 2.0 ** (-r)
    return out


def oracle_coeffs(
    spec: TestSignalSpec,
    basis: WaveletBasis,
    levels: Tuple[int, int],
    T: float = 1.0,
    r_range: Tuple[int, int] = (6, 14),
    rel_tol: float = 1e-8,
    strict: bool = False,
) -> Tuple[CoeffField, Dict[str, Any]]:
    """
    c(Q) = l(Q)^{-1}<f, ψ_Q> = ∫ψ(t) f(2^{-j}(k + t)) dt, 用 ψ 在 2^{-r}Z 上的精确值求和;
    r 逐步加细, 相邻两次之差低于容差的系数即收敛。与金字塔变换完全独立

    Raises:
        QuadratureError: strict=True 且存在未收敛的系数
    """
    scale = float(np.max(np.abs(signal_values(spec, np.linspace(0.0, T, 4097)[:-1], T))))
    report: Dict[str, Any] = {"converged": True, "failures": [], "r_range": list(r_range), "rel_tol": rel_tol}
    if scale == 0.0:
        return CoeffField({}, levels, periodic=True, T=T), report

    floor = 1e-6 * scale
    entries: Dict[DyadicCube, float] = {}
    failures: List[str] = []
    for level in range(levels[0], levels[1] + 1):
        count = int(round(T * 2.0 ** level))
        ks = np.arange(count)
        values: Optional[np.ndarray] = None
        done = np.zeros(count, dtype=bool)
        for r in range(r_range[0], r_range[1] + 1):
            t, psi = basis.wavelet_values(r)
            todo = np.nonzero(~done)[0]
            current = _dyadic_sums(spec, ks[todo], level, t, psi, r, T)
            if values is None:
                values = np.zeros(count)
            else:
                diff = np.abs(current - values[todo])
                done[todo[diff <= rel_tol * np.maximum(np.abs(current), floor)]] = True
            values[todo] = current
            if done.all():
                break
        failures.extend(str(DyadicCube(level, (int(k),))) for k in np.nonzero(~done)[0])
        for k in np.nonzero(values)[0]:
            entries[DyadicCube(level, (int(k),))] = float(values[k])

    report["converged"] = not failures
    report["failures"] = failures
    if failures:
        logger.warning(f"求积对照有 {len(failures)} 个系数未收敛")
        if strict:
            raise QuadratureError(f"求积未收敛的系数: {failures[:5]}{' ...' if len(failures) > 5 else ''}")
    return CoeffField(entries, levels, periodic=True, T=T), report


def level_slope(c: CoeffField, x0: float, levels: Tuple[int, int]) -> float:
    """含 x0 的立方体上 log2|c(Q)| 对层级的回归斜率"""
    xs, ys = [], []
    for level in range(levels[0], levels[1] + 1):
        cube = DyadicCube(level, (int(math.floor(math.ldexp(x0, level))),))
        value = abs(c[cube])
        if value > 0:
            xs.append(level)
            ys.append(math.log2(value))
    if len(xs) < 2:
        raise QuadratureError("含 x0 的非零系数不足两层, 无法回归")
    return float(stats.linregress(xs, ys).slope)


# ---------------------------------------------------------------- 边界扫描


class FrontierScanConfig(BaseModel):
    """扫描网格与固定参数"""
    s_primes: List[float] = Field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    sigmas: List[float] = Field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    family: Literal["B", "F"] = "B"
    tilde: bool = True
    s: float = 0.0
    p: float = math.inf
    q: float = math.inf
    x0: float = 0.5
    depths: List[int] = Field(default_factory=lambda: [6, 8, 10])
    slope_threshold: float = Field(default=0.05, gt=0)

    class Config:
        extra = "forbid"

    @field_validator("p", "q", mode="before")
    @classmethod
    def _extended(cls, v: Any) -> Any:
        return math.inf if isinstance(v, str) and v.strip().lower() in ("inf", "∞") else v

    def params(self, s_prime: float, sigma: float) -> SpaceParams:
        return SpaceParams(
            family=self.family, tilde=self.tilde, s=self.s, s_prime=s_prime, sigma=sigma,
            p=self.p, q=self.q, x0=(self.x0,), n=1,
        )


def required_smoothness(config: FrontierScanConfig) -> float:
    """扫描范围内小波表征所需 r 的下界(加权/非加权两套阈值取对应一套)"""
    worst = -math.inf
    for sp in config.s_primes:
        for sigma in config.sigmas:
            params = config.params(sp, sigma)
            J, n, s, n_p = compute_J(params), params.n, params.s, params.n_over_p
            if params.tilde:
                pos, neg = max(sigma, 0.0), min(sigma, 0.0)
                r = max(sp + pos, pos + s + sp - n_p, J - n - sp - neg)
            else:
                r = max(sp, sigma + s + sp - n_p, J - n - sp)
            worst = max(worst, r)
    return worst


def required_decay(config: FrontierScanConfig) -> float:
    J = compute_J(config.params(config.s_primes[0], config.sigmas[0]))
    if config.tilde:
        return J + max(config.sigmas)
    return max(J, 1.0 + max(config.sigmas))


@dataclass(frozen=True, eq=False)
class FrontierScan:
    """(s', σ) 网格上的范数, 斜率与发散标记; flags[i, k] 对应 sigmas[i], s_primes[k]"""
    config: FrontierScanConfig
    norms: np.ndarray
    slopes: np.ndarray
    flags: np.ndarray
    basis: str

    @property
    def polyline(self) -> List[Tuple[float, Optional[float]]]:
        """每个 σ 行上最小的被标记 s'"""
        line = []
        for i, sigma in enumerate(self.config.sigmas):
            flagged = [sp for k, sp in enumerate(self.config.s_primes) if self.flags[i, k]]
            line.append((sigma, min(flagged) if flagged else None))
        return line

    def monotone(self) -> Dict[str, bool]:
        f = self.flags.astype(int)
        return {
            "sigma": bool(np.all(np.diff(f, axis=0) >= 0)),
            "s_prime": bool(np.all(np.diff(f, axis=1) >= 0)),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": json.loads(self.config.model_dump_json()),
            "basis": self.basis,
            "slopes": self.slopes.tolist(),
            "flags": self.flags.astype(int).tolist(),
            "norms": self.norms.tolist(),
            "polyline": [[sigma, sp] for sigma, sp in self.polyline],
            "monotone": self.monotone(),
        }

    def to_csv(self, path: str) -> Path:
        """斜率矩阵: 首行 s', 每行以 σ 开头"""
        file_path = Path(path)
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            with open(file_path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["sigma\\s_prime"] + [repr(v) for v in self.config.s_primes])
                for sigma, row in zip(self.config.sigmas, self.slopes):
                    writer.writerow([repr(sigma)] + [repr(float(v)) for v in row])
        except OSError as e:
            raise OutputError(f"保存扫描CSV失败: {e}")
        return file_path

    def to_gnuplot(self, path: str) -> Path:
        """gnuplot pm3d 格式: 每行 s' σ slope flag, σ 行之间空行分隔"""
        file_path = Path(path)
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            with open(file_path, "w", encoding="utf-8") as f:
                f.write("# s_prime sigma slope flag\n")
                for i, sigma in enumerate(self.config.sigmas):
                    for k, sp in enumerate(self.config.s_primes):
                        f.write(f"{sp} {sigma} {self.slopes[i, k]:.8g} {int(self.flags[i, k])}\n")
                    f.write("\n")
        except OSError as e:
            raise OutputError(f"保存 gnuplot 数据失败: {e}")
        return file_path


def frontier_scan(
    f: SampledSignal,
    config: FrontierScanConfig,
    basis: WaveletBasis,
    truncation: Optional[TruncationConfig] = None,
) -> FrontierScan:
    """
    对每个 (s', σ) 计算小波系数场在各深度上的截断范数, log2 范数对深度的斜率
    超过 slope_threshold 即标记为发散

    Raises:
        InsufficientBasisError: 小波的光滑性/消失矩不足以覆盖扫描范围
    """
    truncation = truncation or TruncationConfig()
    check_basis_for(basis, required_smoothness(config), required_decay(config))
    depths = sorted(config.depths)
    field_all = dwt_analyze(f, basis, (f.torus_level, depths[-1]))
    fields = {D: field_all.restrict((f.torus_level, D)) for D in depths}

    shape = (len(config.sigmas), len(config.s_primes))
    norms = np.zeros(shape + (len(depths),))
    slopes = np.zeros(shape)
    for i, sigma in enumerate(config.sigmas):
        for k, sp in enumerate(config.s_primes):
            params = config.params(sp, sigma)
            values = [space_norm(fields[D], params, truncation).value for D in depths]
            norms[i, k] = values
            if min(values) <= 0:
                continue
            slopes[i, k] = stats.linregress(depths, np.log2(values)).slope
    flags = slopes > config.slope_threshold
    scan = FrontierScan(config, norms, slopes, flags, basis.name)
    logger.info(f"边界扫描完成: {int(flags.sum())}/{flags.size} 个格点被标记")
    return scan
