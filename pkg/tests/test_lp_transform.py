"""
采样信号与 Littlewood-Paley 变换测试

- 过渡函数对称, φ̂ 支撑在 [1/2, 2], 平方和在覆盖的频段上等于 1
- 奈奎斯特与环面层级检查
- FFT 合成与显式傅里叶级数一致, φ_Q 的系数就是核函数的平移
- 逐层块的 L2 能量之和等于信号能量, 相隔两层的块正交
- f(2x) 的块指标整体加一
- 函数范数与 φ-变换系数, 小波系数的序列范数之比在网格加密下稳定
"""

import numpy as np
import pytest
from pytest import approx

from microlocal.coeff_field import CoeffField, random_field, space_norm
from microlocal.dyadic import DyadicCube
from microlocal.exceptions import DimensionMismatchError, NyquistError, ResolutionError
from microlocal.lp_transform import (
    LPPair,
    analyze_blocks,
    check_levels,
    coefficient_kernel,
    default_levels,
    function_space_norm,
    lp_atom,
    phi_transform_coeffs,
    synthesize,
)
from microlocal.params import SpaceParams
from microlocal.rng import derive_rng
from microlocal.signal import SampledSignal
from microlocal.wavelets import dwt_analyze


def _wave(N: int = 256, freq: int = 8) -> SampledSignal:
    return SampledSignal.from_function(lambda x: np.cos(2 * np.pi * freq * x), N=N, T=1.0)


class TestSampledSignal:
    def test_grid_levels(self):
        f = SampledSignal.zeros(64, T=8.0)
        assert f.h == 0.125
        assert f.grid_level == 3
        assert f.torus_level == -3

    @pytest.mark.parametrize("N,T", [(48, 1.0), (64, 3.0), (4, 4.0)])
    def test_rejects_bad_grid(self, N, T):
        with pytest.raises(ResolutionError):
            SampledSignal.zeros(N, T=T)

    def test_samples_read_only(self):
        f = _wave(32)
        with pytest.raises(ValueError):
            f.samples[0] = 1.0

    def test_mean_zero(self):
        f = SampledSignal.from_function(lambda x: 1.0 + np.sin(2 * np.pi * x), N=64)
        assert abs(f.mean_zero().samples.mean()) < 1e-14

    def test_csv_round_trip(self, tmp_path):
        f = _wave(64, 3)
        csv_path, sidecar = f.to_csv(str(tmp_path / "f.csv"))
        assert sidecar.exists()
        back = SampledSignal.from_csv(str(csv_path))
        assert back.T == f.T
        assert np.array_equal(back.samples, f.samples)


class TestLPPair:
    def test_transition_symmetric(self, pair):
        x = np.linspace(0.0, 1.0, 101)
        assert np.allclose(pair.nu(x) + pair.nu(1.0 - x), 1.0)

    def test_support(self, pair):
        assert pair.phi_hat(np.array([0.4, 0.5, 2.5]))[[0, 2]].tolist() == [0.0, 0.0]
        assert pair.phi_hat(np.array([0.5]))[0] == approx(0.0, abs=1e-15)
        assert pair.phi_hat(np.array([1.0]))[0] == approx(1.0)

    def test_lower_bound_positive(self, pair):
        assert pair.lower_bound() > 0.0

    @pytest.mark.parametrize("order", [None, 4])
    def test_partition_of_unity(self, order):
        pair = LPPair(smoothness_order=order)
        radius = np.geomspace(1.0, 64.0, 257)
        assert np.allclose(pair.partition_sum(radius, (-1, 7)), 1.0)

    def test_order_too_small(self):
        with pytest.raises(ValueError):
            LPPair(smoothness_order=1)


class TestLevels:
    def test_default_levels(self):
        assert default_levels(64, 1.0) == (2, 5)

    def test_nyquist(self):
        with pytest.raises(NyquistError):
            check_levels(64, 1.0, (0, 6))

    def test_coarser_than_torus(self):
        with pytest.raises(NyquistError):
            check_levels(64, 1.0, (-1, 3))


class TestTransforms:
    def test_block_energy(self, pair):
        f = _wave()
        blocks = analyze_blocks(f, pair)
        energy = sum(b.l2_norm() ** 2 for b in blocks.values())
        assert energy == approx(f.l2_norm() ** 2, rel=1e-10)

    def test_synthesis_matches_fourier_series(self, pair):
        cube = DyadicCube(3, (2,))
        c = CoeffField.single(cube, 1.0, level_window=(3, 3), periodic=True, T=1.0)
        fft_atom = synthesize(c, pair, N=256)
        direct = lp_atom(cube, pair, N=256, T=1.0)
        assert np.allclose(fft_atom.samples, direct.samples, atol=1e-10)

    def test_coefficients_of_single_atom(self, pair):
        cube = DyadicCube(4, (3,))
        c = CoeffField.single(cube, 1.0, level_window=(4, 4), periodic=True, T=1.0)
        f = synthesize(c, pair, N=256)
        coeffs = phi_transform_coeffs(f, pair, levels=(4, 4))
        kernel = coefficient_kernel(4, pair, N=256, T=1.0)
        for k in range(16):
            expected = kernel.samples[((k - 3) * 16) % 256]
            assert coeffs[DyadicCube(4, (k,))] == approx(expected, abs=1e-10)

    def test_synthesis_needs_periodic_field(self, pair):
        with pytest.raises(DimensionMismatchError):
            synthesize(CoeffField.single(DyadicCube(3, (0,)), 1.0), pair)

    def test_block_index_shifts_under_dilation(self, pair):
        g = SampledSignal(np.random.default_rng(1).standard_normal(128)).mean_zero()
        f = SampledSignal(np.tile(g.samples, 2))
        coarse = analyze_blocks(g, pair, (2, 5))
        fine = analyze_blocks(f, pair, (3, 6))
        for i in range(2, 6):
            assert np.allclose(fine[i + 1].samples, np.tile(coarse[i].samples, 2), atol=1e-12)

    def test_blocks_two_apart_are_orthogonal(self, pair):
        f = SampledSignal(np.random.default_rng(2).standard_normal(256))
        blocks = analyze_blocks(f, pair, (2, 7))
        for i in range(2, 6):
            inner = float(np.sum(blocks[i].samples * blocks[i + 2].samples)) * f.h
            assert inner == approx(0.0, abs=1e-12 * f.l2_norm() ** 2)


class TestFunctionSpaceNorm:
    def test_zero_signal(self, pair, unit_params):
        assert function_space_norm(SampledSignal.zeros(64), unit_params, pair).value == 0.0

    def test_homogeneous(self, pair):
        f = _wave(128, 5)
        params = SpaceParams(family="F", s=0.1, s_prime=0.5, sigma=0.2, p=2, q=2, x0=(0.25,))
        base = function_space_norm(f, params, pair).value
        assert function_space_norm(f * 3.0, params, pair).value == approx(3.0 * base, rel=1e-10)

    def test_dimension_mismatch(self, pair):
        params = SpaceParams(n=2, x0=(0.0, 0.0))
        with pytest.raises(DimensionMismatchError):
            function_space_norm(_wave(64), params, pair)


@pytest.mark.slow
def test_coefficient_norms_bracket_function_norm(pair, db6):
    params = SpaceParams(family="B", s=0.1, s_prime=0.3, sigma=0.2, p=2, q=2, x0=(0.5,))
    rng = derive_rng(0, "lp.round_trip")
    fields = [random_field(rng, (2, 6), periodic=True, T=1.0) for _ in range(50)]
    brackets = {"lp": [], "wavelet": []}
    for N in (256, 1024, 4096):
        ratios = {"lp": [], "wavelet": []}
        for c in fields:
            f = synthesize(c, pair, N)
            norm = function_space_norm(f, params, pair).value
            ratios["lp"].append(norm / space_norm(phi_transform_coeffs(f, pair), params).value)
            ratios["wavelet"].append(norm / space_norm(dwt_analyze(f, db6), params).value)
        for name, values in ratios.items():
            brackets[name].append((min(values), max(values)))

    for name, values in brackets.items():
        (lo_prev, hi_prev), (lo, hi) = values[-2], values[-1]
        assert hi / hi_prev - 1.0 <= 0.05, name
        assert lo_prev / lo - 1.0 <= 0.05, name
    assert all(0.5 <= lo and hi <= 2.0 for lo, hi in brackets["lp"])
