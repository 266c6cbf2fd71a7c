"""
采样信号模块
周期环面 [0,T)^n 上的均匀网格采样, 样本点位于 i·h (h = T/N)
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from .dyadic import Region
from .exceptions import OutputError, ResolutionError


def _power_of_two(value: float) -> bool:
    return value > 0 and abs(math.log2(value) - round(math.log2(value))) < 1e-12


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """环面上的采样信号"""
    samples: np.ndarray
    T: float = 1.0
    n: int = 1

    def __post_init__(self) -> None:
        samples = np.array(self.samples, copy=True)
        if samples.ndim != self.n or len(set(samples.shape)) != 1:
            raise ResolutionError(f"样本形状 {samples.shape} 与维数 n={self.n} 不匹配")
        if not _power_of_two(samples.shape[0]):
            raise ResolutionError(f"N 必须是2的幂: {samples.shape[0]}")
        if not _power_of_two(self.T):
            raise ResolutionError(f"T 必须是2的幂: {self.T}")
        if samples.shape[0] <= self.T:
            raise ResolutionError(f"N={samples.shape[0]} 必须大于 T={self.T}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def N(self) -> int:
        return int(self.samples.shape[0])

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def grid_level(self) -> int:
        """单个采样单元所在的二进层级 m = log2(N/T)"""
        return int(round(math.log2(self.N / self.T)))

    @property
    def torus_level(self) -> int:
        return -int(round(math.log2(self.T)))

    @property
    def domain(self) -> Region:
        return Region.unit(self.n, self.T)

    @property
    def is_complex(self) -> bool:
        return bool(np.iscomplexobj(self.samples))

    def coords(self) -> np.ndarray:
        return np.arange(self.N) * self.h

    def mesh(self) -> Tuple[np.ndarray, ...]:
        axis = self.coords()
        return tuple(np.meshgrid(*([axis] * self.n), indexing="ij"))

    def with_samples(self, samples: np.ndarray) -> "SampledSignal":
        return SampledSignal(np.asarray(samples), T=self.T, n=self.n)

    def real(self) -> "SampledSignal":
        return self.with_samples(np.real(self.samples))

    def mean_zero(self) -> "SampledSignal":
        """去掉零频分量"""
        return self.with_samples(self.samples - self.samples.mean())

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.h ** self.n))

    def __add__(self, other: "SampledSignal") -> "SampledSignal":
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "SampledSignal") -> "SampledSignal":
        return self.with_samples(self.samples - other.samples)

    def __mul__(self, factor: complex) -> "SampledSignal":
        return self.with_samples(self.samples * factor)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, N: int, T: float = 1.0, n: int = 1) -> "SampledSignal":
        return cls(np.zeros((N,) * n), T=T, n=n)

    @classmethod
    def from_function(cls, fn: Callable[..., np.ndarray], N: int, T: float = 1.0, n: int = 1) -> "SampledSignal":
        axis = np.arange(N) * (T / N)
        mesh = np.meshgrid(*([axis] * n), indexing="ij")
        return cls(np.asarray(fn(*mesh)), T=T, n=n)

    def to_csv(self, path: str) -> Tuple[Path, Path]:
        """写出 index,value CSV 与 {N, T, n} JSON 附属文件"""
        csv_path = Path(path)
        sidecar = csv_path.with_suffix(".json")
        flat = self.samples.reshape(-1)
        try:
            csv_path.parent.mkdir(parents=True, exist_ok=True)
            with open(csv_path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                if self.is_complex:
                    writer.writerow(["index", "value", "imag"])
                    for i, v in enumerate(flat):
                        writer.writerow([i, repr(float(v.real)), repr(float(v.imag))])
                else:
                    writer.writerow(["index", "value"])
                    for i, v in enumerate(flat):
                        writer.writerow([i, repr(float(v))])
            with open(sidecar, "w", encoding="utf-8") as f:
                json.dump({"N": self.N, "T": self.T, "n": self.n}, f, ensure_ascii=False, indent=2)
        except OSError as e:
            raise OutputError(f"保存信号文件失败: {e}")
        return csv_path, sidecar

    @classmethod
    def from_csv(cls, path: str, sidecar: Optional[str] = None) -> "SampledSignal":
        csv_path = Path(path)
        meta_path = Path(sidecar) if sidecar else csv_path.with_suffix(".json")
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
        N, T, n = int(meta["N"]), float(meta["T"]), int(meta.get("n", 1))
        with open(csv_path, "r", newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            rows = list(reader)
        if len(rows) != N ** n:
            raise ResolutionError(f"信号文件行数 {len(rows)} 与 N^n={N ** n} 不一致")
        complex_rows = rows and "imag" in rows[0]
        values = np.zeros(N ** n, dtype=complex if complex_rows else float)
        for row in rows:
            idx = int(row["index"])
            values[idx] = float(row["value"]) + (1j * float(row["imag"]) if complex_rows else 0.0)
        return cls(values.reshape((N,) * n), T=T, n=n)
