"""
算子测试

- Fourier 乘子作用于纯波
- 采样符号的读写与阶估计
- CZ 核常数(含光滑高斯核)
- Hilbert 有界, Bessel 位势按阶平移 s'
- 小波像的分子检验: 矩在宽环面上计算, 常数跨层一致
- 升阶算子原检验失败时按 r1 - 阶重验
"""

import math

import numpy as np
import pytest
from pytest import approx

from microlocal.config import HarnessConfig
from microlocal.dyadic import DyadicCube
from microlocal.exceptions import DimensionMismatchError, NyquistError, ResolutionError, SymbolFileError
from microlocal.operators import (
    CZKernelSpec,
    SymbolSpec,
    apply_multiplier,
    apply_symbol,
    hilbert_kernel,
    image_molecule_check,
    l2_amplification,
    multiplier_order_slope,
    multiplier_symbol,
    operator_boundedness_check,
    parse_operator,
    verify_cz_kernel,
)
from microlocal.params import SpaceParams
from microlocal.signal import SampledSignal


def _wave(fn, k: int, N: int = 64) -> SampledSignal:
    return SampledSignal.from_function(lambda x: fn(2 * np.pi * k * x), N)


class TestMultipliers:
    def test_hilbert_of_cosine(self):
        out = apply_multiplier(_wave(np.cos, 3), "hilbert")
        assert np.allclose(out.samples, _wave(np.sin, 3).samples, atol=1e-12)

    def test_hilbert_twice(self):
        f = _wave(np.sin, 2) + _wave(np.cos, 5)
        twice = apply_multiplier(apply_multiplier(f, "hilbert"), "hilbert")
        assert np.allclose(twice.samples, -f.samples, atol=1e-12)

    def test_bessel(self):
        out = apply_multiplier(_wave(np.cos, 2), "bessel", 2.0)
        factor = 1.0 / (1.0 + (4 * np.pi) ** 2)
        assert np.allclose(out.samples, factor * _wave(np.cos, 2).samples, atol=1e-12)

    def test_derivative(self):
        out = apply_multiplier(_wave(np.sin, 2), "derivative", 1)
        assert np.allclose(out.samples, 4 * np.pi * _wave(np.cos, 2).samples, atol=1e-9)

    def test_derivative_aliasing(self):
        noise = SampledSignal(np.random.default_rng(0).standard_normal(64))
        with pytest.raises(NyquistError):
            apply_multiplier(noise, "derivative", 1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            multiplier_symbol("riesz", 16, 1.0)

    def test_hilbert_one_dimensional_only(self):
        with pytest.raises(DimensionMismatchError):
            multiplier_symbol("hilbert", 16, 1.0, n=2)


class TestSymbols:
    def test_constant_symbol_matches_multiplier(self):
        f = _wave(np.cos, 3) + _wave(np.sin, 7)
        symbol = SymbolSpec.from_multiplier("bessel", 64, 1.0, -1.0, 1.0)
        assert not symbol.x_dependent
        expected = apply_multiplier(f, "bessel", 1.0)
        assert np.allclose(apply_symbol(f, symbol).samples, expected.samples, atol=1e-10)

    def test_x_dependent_symbol(self):
        f = _wave(np.cos, 3)
        symbol = SymbolSpec.from_function(lambda x, xi: 1.0 + 0.5 * np.cos(2 * np.pi * x) + 0 * xi, 64, 1.0, 0.0)
        out = apply_symbol(f, symbol)
        assert np.allclose(out.samples, (1.0 + 0.5 * np.cos(2 * np.pi * f.coords())) * f.samples, atol=1e-10)

    def test_grid_mismatch(self):
        symbol = SymbolSpec.from_multiplier("identity", 32, 1.0, 0.0)
        with pytest.raises(DimensionMismatchError):
            apply_symbol(_wave(np.cos, 1), symbol)

    def test_estimate_order(self):
        symbol = SymbolSpec.from_multiplier("bessel", 256, 1.0, 0.0, 1.0)
        assert symbol.estimate_order() == approx(-1.0, abs=0.05)

    def test_seminorms_identity(self):
        table = SymbolSpec.from_multiplier("identity", 16, 1.0, 0.0).seminorms(order=2)
        assert table["0,0"] == approx(1.0)
        assert table["1,0"] == approx(0.0)
        assert table["0,1"] == approx(0.0)

    def test_csv_round_trip(self, tmp_path):
        symbol = SymbolSpec.from_multiplier("hilbert", 8, 1.0, 0.0)
        path = symbol.to_csv(str(tmp_path / "hilbert.csv"))
        loaded = SymbolSpec.from_csv(str(path), mu=0.0)
        assert loaded.N == 8 and loaded.T == approx(1.0)
        assert np.allclose(loaded.values, symbol.values)
        assert not loaded.x_dependent

    def test_csv_missing(self, tmp_path):
        with pytest.raises(SymbolFileError):
            SymbolSpec.from_csv(str(tmp_path / "none.csv"))

    @pytest.mark.parametrize(
        "text",
        [
            "x,xi,real\n0.0,0.0,1.0\n",
            "x,real\n0.0,1.0\n",
            "x,xi,real,imag\n",
            "x,xi,real,imag\n0.0,0.0,1,0\n0.5,0.0,1,0\n0.0,1.0,1,0\n0.5,1.0,1,0\n",
        ],
    )
    def test_csv_malformed(self, tmp_path, text):
        path = tmp_path / "bad.csv"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(SymbolFileError):
            SymbolSpec.from_csv(str(path), mu=0.0)


class TestPresets:
    @pytest.mark.parametrize(
        "text, name, order",
        [("identity", "identity", 0.0), ("hilbert", "hilbert", 0.0), ("bessel:2", "bessel:2", -2.0), ("derivative:1", "derivative:1", 1.0)],
    )
    def test_parse(self, text, name, order):
        operator = parse_operator(text)
        assert operator.name == name
        assert operator.order == order

    def test_symbol_file(self, tmp_path):
        path = SymbolSpec.from_multiplier("identity", 8, 1.0, 0.0).to_csv(str(tmp_path / "id.csv"))
        operator = parse_operator(f"symbol:{path}")
        f = SampledSignal.from_function(lambda x: np.cos(2 * np.pi * x), 8)
        assert np.allclose(operator(f).samples, f.samples)

    @pytest.mark.parametrize("text", ["riesz", "symbol"])
    def test_rejected(self, text):
        with pytest.raises(ValueError):
            parse_operator(text)

    def test_order_slope(self):
        assert multiplier_order_slope(parse_operator("derivative:1"))["slope"] == approx(1.0, abs=1e-9)
        assert multiplier_order_slope(parse_operator("bessel:1"))["slope"] == approx(-1.0, abs=0.02)

    def test_l2_amplification_of_hilbert(self):
        assert l2_amplification(parse_operator("hilbert"), N=128, ensemble_size=4) == approx(1.0)


class TestKernels:
    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            CZKernelSpec(r1=1, r2=1, epsilon=0.0)

    def test_hilbert_size_constant(self):
        report = verify_cz_kernel(hilbert_kernel, CZKernelSpec(r1=1, r2=1, epsilon=1.0), resolutions=(64, 128))
        for constants in report["constants"].values():
            assert constants["size:0"] == approx(1.0 / math.pi)
            assert all(math.isfinite(v) for v in constants.values())

    def test_wrong_homogeneity_fails(self):
        kernel = lambda x, y: np.abs(x - y) ** -1.5
        report = verify_cz_kernel(kernel, CZKernelSpec(r1=1, r2=1, epsilon=1.0), resolutions=(64, 128))
        assert report["growth"]["size:0"] == approx(2 ** 0.5 - 1.0, rel=1e-6)
        assert not report["pass"]

    def test_coarse_resolution(self):
        with pytest.raises(ResolutionError):
            verify_cz_kernel(hilbert_kernel, CZKernelSpec(r1=1, r2=1, epsilon=1.0), resolutions=(16, 32))

    def test_smooth_kernel(self):
        kernel = lambda x, y: np.exp(-((x - y) ** 2))
        report = verify_cz_kernel(kernel, CZKernelSpec(r1=1, r2=1, epsilon=1.0), R=4.0, resolutions=(64, 128))
        for constants in report["constants"].values():
            assert constants["size:0"] == approx(math.exp(-0.5) / math.sqrt(2.0), rel=1e-2)
            assert all(math.isfinite(v) for v in constants.values())
        assert report["pass"]


class TestBoundedness:
    def test_identity_plateau(self, unit_params, pair, small_harness):
        report = operator_boundedness_check(
            parse_operator("identity"), unit_params, unit_params, pair, small_harness,
            grid_sizes=(64, 128), field_levels=(0, 3), ensemble_size=2,
        )
        assert report["max_ratios"] == approx([1.0, 1.0])
        assert report["verdict"] == "bounded"

    @pytest.mark.slow
    def test_hilbert_is_bounded(self, pair):
        params = SpaceParams(family="B", s=0.1, s_prime=0.3, sigma=0.2, p=2, q=2)
        report = operator_boundedness_check(
            parse_operator("hilbert"), params, params, pair, HarnessConfig(ensemble_size=10, seed=0)
        )
        assert report["verdict"] == "bounded"

    @pytest.mark.slow
    @pytest.mark.parametrize("text, s_in", [("bessel:-1", 0.5), ("bessel:1", -0.5)])
    def test_bessel_shifts_s_prime(self, pair, text, s_in):
        operator = parse_operator(text)
        params_in = SpaceParams(family="B", s=0.1, s_prime=s_in, sigma=0.2, p=2, q=2)
        params_out = SpaceParams(family="B", s=0.1, s_prime=s_in - operator.order, sigma=0.2, p=2, q=2)
        report = operator_boundedness_check(operator, params_in, params_out, pair, HarnessConfig(ensemble_size=10, seed=0))
        assert report["verdict"] == "bounded"


class TestWaveletImages:
    CUBES = [DyadicCube(3, (2,)), DyadicCube(4, (5,))]

    def test_resolution_guard(self, db4):
        with pytest.raises(ResolutionError):
            image_molecule_check(parse_operator("identity"), db4, self.CUBES, r1=1, r2=1, points_per_cube=8)

    def test_identity_images(self, db4):
        report = image_molecule_check(parse_operator("identity"), db4, self.CUBES, r1=1, r2=2)
        assert [entry["torus"] for entry in report["cubes"]] == [4.0, 2.0]
        assert [entry["moment_torus"] for entry in report["cubes"]] == [32.0, 16.0]
        assert report["level_spread"] == approx(0.0, abs=1e-9)
        assert report["pass"]
        assert "spec_shift" not in report

    @pytest.mark.slow
    def test_hilbert_db6(self, db6):
        report = image_molecule_check(parse_operator("hilbert"), db6, [DyadicCube(3, (2,))], r1=1, r2=1)
        assert report["cubes"][0]["torus"] == 8.0
        assert report["cubes"][0]["report"]["moments_ok"]
        assert report["pass"]

    @pytest.mark.slow
    @pytest.mark.parametrize("r2", [1, 2, 3])
    def test_hilbert_db4_moments(self, db4, r2):
        report = image_molecule_check(parse_operator("hilbert"), db4, self.CUBES, r1=1, r2=r2)
        for entry in report["cubes"]:
            assert entry["report"]["moments_ok"], entry["report"]["moments"]
            assert entry["decay_window_growth"] <= 0.05
        assert report["level_spread"] <= 0.05
        assert report["pass"]

    @pytest.mark.slow
    def test_order_raising_operator_needs_shift(self, db10):
        cubes = [DyadicCube(3, (2,)), DyadicCube(4, (4,))]
        report = image_molecule_check(parse_operator("bessel:-1"), db10, cubes, r1=1, r2=1)
        assert report["level_spread"] > 0.5
        assert not report["pass"]
        shift = report["spec_shift"]
        assert shift["r1"] == 0
        assert shift["order"] == 1.0
        assert shift["report"]["level_spread"] <= 0.05
        assert shift["pass"]
