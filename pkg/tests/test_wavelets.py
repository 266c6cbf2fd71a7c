"""
小波模块测试

- Daubechies 滤波器正交, 尺度函数在二进点上的值满足单位分解
- 消失矩: γ < N 阶矩为零
- 金字塔分析/合成互逆, 单系数合成后再分析得到同一系数场
- Σ|c(Q)|^2 l(Q) 等于信号能量
- 基的光滑性不足时拒绝计算
"""

import numpy as np
import pytest
from pytest import approx

from microlocal.coeff_field import CoeffField
from microlocal.dyadic import DyadicCube
from microlocal.exceptions import InsufficientBasisError, ResolutionError
from microlocal.signal import SampledSignal
from microlocal.wavelets import (
    build_wavelet_basis,
    check_basis_for,
    coefficient_energy,
    dwt_analyze,
    dwt_analyze_all,
    dwt_synthesize,
    from_field_normalization,
    orientations,
    to_field_normalization,
)


def _smooth_signal(N: int = 128) -> SampledSignal:
    f = SampledSignal.from_function(lambda x: np.sin(2 * np.pi * x) + 0.3 * np.cos(6 * np.pi * x) ** 3, N=N)
    return f.mean_zero()


class TestBasis:
    @pytest.mark.parametrize("moments", range(1, 11))
    def test_filters_orthonormal(self, moments):
        basis = build_wavelet_basis(moments)
        assert basis.filter_orthonormality_error() < 1e-10
        assert basis.filter_length == 2 * moments

    def test_unsupported_moments(self):
        with pytest.raises(InsufficientBasisError):
            build_wavelet_basis(11)

    @pytest.mark.parametrize("r", [0, 3, 6])
    def test_scaling_partition_of_unity(self, db4, r):
        x, phi = db4.scaling_values(r)
        assert x[-1] == approx(db4.support[1])
        assert phi.sum() * 2.0 ** (-r) == approx(1.0, abs=1e-10)

    def test_vanishing_moments(self, db4):
        moments = db4.moments(4)
        assert np.allclose(moments[:4], 0.0, atol=1e-8)
        assert abs(moments[4]) > 1e-4

    def test_wavelet_unit_norm(self, db6):
        _, psi = db6.wavelet_values(10)
        assert np.sum(psi ** 2) * 2.0 ** -10 == approx(1.0, rel=1e-4)

    def test_describe(self, db6):
        assert db6.describe() == {"name": "db6", "vanishing_moments": 6, "smoothness": 2.189, "decay": "inf"}


class TestTransform:
    def test_normalization_inverse(self):
        d = np.array([1.0, -2.0, 0.5])
        assert np.allclose(from_field_normalization(to_field_normalization(d, 5), 5), d)

    @pytest.mark.parametrize("moments", [1, 4, 6])
    def test_perfect_reconstruction(self, moments):
        basis = build_wavelet_basis(moments)
        f = _smooth_signal()
        c = dwt_analyze(f, basis)
        back = dwt_synthesize(c, basis, N=f.N)
        assert np.allclose(back.samples, f.samples, atol=1e-10)

    def test_single_coefficient(self, db4):
        cube = DyadicCube(3, (2,))
        c = CoeffField.single(cube, 1.0, level_window=(0, 5), periodic=True, T=1.0)
        f = dwt_synthesize(c, db4, N=64)
        back = dwt_analyze(f, db4, levels=(0, 5))
        for level in range(0, 6):
            for k in range(2 ** level):
                other = DyadicCube(level, (k,))
                assert back[other] == approx(c[other], abs=1e-10)

    def test_two_dimensional_orientations(self, db4):
        assert orientations(2) == ["ad", "da", "dd"]
        f = SampledSignal.from_function(lambda x, y: np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y), N=32, n=2)
        fields = dwt_analyze_all(f, db4)
        assert sorted(fields) == ["ad", "da", "dd"]
        back = dwt_synthesize(fields, db4, N=32)
        assert np.allclose(back.samples, f.samples, atol=1e-10)
        with pytest.raises(ValueError):
            dwt_analyze(f, db4)

    def test_parseval(self, db6):
        f = SampledSignal.from_function(lambda x: np.cos(6 * np.pi * x) + 0.5 * np.sin(10 * np.pi * x), N=1024)
        assert f.l2_norm() ** 2 == approx(0.625, rel=1e-12)
        assert coefficient_energy(dwt_analyze(f, db6)) == approx(0.625, rel=1e-6)

    def test_level_too_fine(self, db4):
        with pytest.raises(ResolutionError):
            dwt_analyze(_smooth_signal(64), db4, levels=(0, 6))


class TestBasisCheck:
    def test_db4_covers_r1(self, db4):
        check_basis_for(db4, 1.5)

    def test_db4_refuses_r2(self, db4):
        with pytest.raises(InsufficientBasisError):
            check_basis_for(db4, 2.0)

    def test_db6_covers_r2(self, db6):
        check_basis_for(db6, 2.0, required_L=10.0)
