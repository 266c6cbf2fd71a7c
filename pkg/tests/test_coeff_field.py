"""
系数场与序列空间范数测试

- 单系数场的块范数与空间范数有解析值
- 加权块范数随积分节点加密收敛到 2
- σ < 0 时外层链发散标记
- 峰值界拟合常数, c* 正则化, 分数次极大算子
- ‖c*‖/‖c‖ 在各深度上的最大值稳定且不小于 1
- 单调性: 场单调, P 单调, q 单调
- CSV/字典往返
"""

import math

import numpy as np
import pytest
from pytest import approx

from microlocal.coeff_field import (
    CoeffField,
    block_norm,
    chain_norm,
    coefficient_bound_check,
    maximal_Mt,
    random_field,
    regularize_star,
    space_norm,
    space_norm_report,
)
from microlocal.config import TruncationConfig
from microlocal.dyadic import DyadicCube, Region
from microlocal.exceptions import CalculationError, DimensionMismatchError
from microlocal.params import SpaceParams
from microlocal.rng import derive_rng
from microlocal.signal import SampledSignal


@pytest.fixture
def single(q0) -> CoeffField:
    return CoeffField.single(q0, 1.0)


class TestCoeffField:
    def test_absent_cube_is_zero(self, single):
        assert single[DyadicCube(3, (1,))] == 0.0
        assert single[DyadicCube(3, (0,))] == 1.0

    def test_level_window_enforced(self):
        with pytest.raises(ValueError):
            CoeffField({DyadicCube(5, (0,)): 1.0}, level_window=(0, 3))

    def test_spatial_window_enforced(self):
        with pytest.raises(ValueError):
            CoeffField({DyadicCube(1, (4,)): 1.0}, level_window=(0, 3))

    def test_dimension_enforced(self):
        with pytest.raises(DimensionMismatchError):
            CoeffField({DyadicCube(1, (0, 0)): 1.0}, level_window=(0, 3), n=1)

    def test_periodic_wrap(self):
        c = CoeffField({DyadicCube(2, (5,)): 2.0}, level_window=(0, 2), periodic=True, T=1.0)
        assert c[DyadicCube(2, (1,))] == 2.0
        assert c[DyadicCube(2, (-3,))] == 2.0

    def test_csv_round_trip(self, tmp_path):
        rng = derive_rng(1, "csv")
        c = random_field(rng, (0, 4), density=0.5)
        path = c.to_csv(str(tmp_path / "c.csv"))
        back = CoeffField.from_csv(str(path))
        assert back.entries == c.entries
        assert back.level_window == c.level_window

    def test_shifted_and_restrict(self, single):
        moved = single.shifted((1,), level=3)
        assert moved[DyadicCube(3, (1,))] == 1.0
        assert single.restrict((0, 2)).is_zero()


class TestBlockNorm:
    def test_unweighted_single(self, single, unit_params):
        assert block_norm(single, DyadicCube(0, (0,)), unit_params) == approx(2 ** -1.5, rel=1e-12)

    def test_smoothness_factor(self, single, unit_params):
        params = unit_params.with_(s_prime=1.0)
        assert block_norm(single, DyadicCube(0, (0,)), params) == approx(2 ** 1.5, rel=1e-12)

    def test_weighted_converges_to_two(self, single, unit_params):
        params = unit_params.with_(tilde=True, sigma=1.0)
        errors = []
        for refine in (1, 3, 6):
            value = block_norm(single, DyadicCube(0, (0,)), params, TruncationConfig(quadrature_refine=refine))
            errors.append(abs(value - 2.0))
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-3

    def test_disjoint_cube_rejected(self, single, unit_params):
        with pytest.raises(CalculationError):
            block_norm(single, DyadicCube(0, (3,)), unit_params)

    @pytest.mark.parametrize("family", ["B", "F"])
    @pytest.mark.parametrize("p,q", [(2, 2), (1, 3), ("inf", 2), (2, "inf"), ("inf", "inf"), (0.5, 0.7)])
    def test_monotone_in_field(self, family, p, q):
        rng = derive_rng(2, f"mono.{family}.{p}.{q}")
        c = random_field(rng, (0, 4), density=0.6)
        bigger = c._like({cube: abs(v) * 1.5 + 0.1 for cube, v in c.items()})
        params = SpaceParams(family=family, s_prime=0.3, p=p, q=q, x0=(0.2,))
        P = DyadicCube(1, (0,))
        assert block_norm(c, P, params) <= block_norm(bigger, P, params) * (1 + 1e-12)

    @pytest.mark.parametrize("family", ["B", "F"])
    def test_monotone_in_cube(self, family):
        c = random_field(derive_rng(3, family), (0, 5), density=0.4)
        params = SpaceParams(family=family, s_prime=0.2, p=1.5, q=3, x0=(0.0,))
        P = DyadicCube(3, (2,))
        chain = [P.ancestor(level) for level in range(3, -1, -1)]
        values = [block_norm(c, Q, params) for Q in chain]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("family", ["B", "F"])
    def test_q_monotone(self, family):
        c = random_field(derive_rng(4, family), (0, 5), density=0.4)
        P = DyadicCube(0, (0,))
        values = [
            block_norm(c, P, SpaceParams(family=family, s_prime=0.1, p=2, q=q, x0=(0.0,)))
            for q in (0.5, 1, 2, 4, "inf")
        ]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(values, values[1:]))

    def test_homogeneous(self):
        c = random_field(derive_rng(5, "hom"), (0, 4))
        params = SpaceParams(family="F", s_prime=0.4, p=3, q=2, x0=(0.5,))
        P = DyadicCube(0, (0,))
        assert block_norm(c.scaled(-3.0), P, params) == approx(3.0 * block_norm(c, P, params), rel=1e-12)


class TestSpaceNorm:
    def test_zero_field(self, unit_params):
        zero = CoeffField({}, level_window=(0, 3))
        for params in (unit_params, unit_params.with_(tilde=True, sigma=0.5), unit_params.with_(family="F", p="inf")):
            assert space_norm(zero, params).value == 0.0

    def test_single_coefficient(self, single, unit_params):
        result = space_norm(single, unit_params)
        assert result.value == approx(2 ** -1.5, rel=1e-12)
        assert not result.diverging

    def test_negative_sigma_diverges(self, single, unit_params):
        result = space_norm(single, unit_params.with_(sigma=-0.5))
        assert result.diverging
        values = [v for _, v in result.profile]
        assert values[0] > values[-1]

    def test_report_has_profile(self, single, unit_params):
        report = space_norm_report(single, unit_params)
        assert report["value"] == approx(2 ** -1.5)
        assert len(report["profile"]) == TruncationConfig().outer_levels + 4
        assert report["truncation"]["outer_levels"] == TruncationConfig().outer_levels

    def test_chain_norm_below_space_norm(self):
        c = random_field(derive_rng(6, "chain"), (0, 5))
        params = SpaceParams(family="B", s=0.1, s_prime=0.2, sigma=0.1, p=2, q=2, x0=(0.3,))
        assert chain_norm(c, params).value <= space_norm(c, params).value * (1 + 1e-12)


class TestCoefficientBound:
    def test_single_cube_fit(self, single, unit_params):
        check = coefficient_bound_check(single, unit_params)
        assert check.C == approx(2 ** -1.5, rel=1e-12)

    def test_zero_field(self, unit_params):
        check = coefficient_bound_check(CoeffField({}, level_window=(0, 3)), unit_params)
        assert check.C == 0.0

    def test_random_field_within_kappa(self):
        c = random_field(derive_rng(7, "bound"), (0, 7), density=0.8)
        params = SpaceParams(family="B", s=0.2, s_prime=0.1, sigma=0.3, p=2, q=2, x0=(0.4,))
        check = coefficient_bound_check(c, params)
        assert check.holds


class TestRegularizeStar:
    def test_single_entry_kernel(self, single):
        star = regularize_star(single, L=4)
        assert star[DyadicCube(3, (0,))] == approx(1.0)
        assert star[DyadicCube(3, (3,))] == approx(4.0 ** -4)

    def test_dominates(self):
        c = random_field(derive_rng(8, "star"), (0, 5))
        star = regularize_star(c, L=4)
        assert all(abs(v) <= star[cube] * (1 + 1e-12) for cube, v in c.items())

    def test_translation_equivariant(self):
        c = CoeffField({DyadicCube(3, (2,)): 1.0, DyadicCube(3, (4,)): -2.0}, level_window=(0, 3),
                       spatial_window=Region((-1.0,), (2.0,)))
        star = regularize_star(c, L=3)
        moved = regularize_star(c.shifted((1,), level=3), L=3)
        for k in range(-4, 12):
            assert moved[DyadicCube(3, (k + 1,))] == approx(star[DyadicCube(3, (k,))])

    def test_kernel_not_summable(self, single):
        with pytest.raises(CalculationError):
            regularize_star(single, L=1.0)

    @pytest.mark.slow
    def test_star_norm_bracket(self):
        params = SpaceParams(family="B", s=0.1, s_prime=0.2, sigma=0.1, p=2, q=2, x0=(0.3,))
        worst = []
        for depth in (6, 8, 10):
            rng = derive_rng(0, f"star.{depth}")
            ratios = []
            for _ in range(50):
                c = random_field(rng, (0, depth))
                star = regularize_star(c, L=4)
                assert all(abs(v) <= star[cube] * (1 + 1e-12) for cube, v in c.items())
                ratios.append(space_norm(star, params).value / space_norm(c, params).value)
            assert min(ratios) >= 1.0 - 1e-12
            worst.append(max(ratios))
        assert worst[-1] / worst[-2] - 1.0 <= 0.05


class TestMaximalFunction:
    def _indicator(self) -> SampledSignal:
        return SampledSignal.from_function(lambda x: (x < 1.0).astype(float), N=64, T=8.0)

    def test_indicator_dyadic(self):
        Mg = maximal_Mt(self._indicator(), t=1.0, cube_class="dyadic")
        assert Mg.samples[16] == approx(0.25)

    def test_indicator_half_power(self):
        Mg = maximal_Mt(self._indicator(), t=0.5, cube_class="dyadic")
        assert Mg.samples[16] == approx(1.0 / 16.0)

    def test_constant(self):
        g = SampledSignal.from_function(lambda x: np.ones_like(x), N=32, T=1.0)
        assert np.allclose(maximal_Mt(g, t=0.7).samples, 1.0)

    def test_dominates_modulus(self):
        rng = derive_rng(9, "mt")
        g = SampledSignal(rng.standard_normal(64), T=1.0)
        assert np.all(maximal_Mt(g, 1.0).samples >= np.abs(g.samples) - 1e-12)

    @pytest.mark.parametrize("t", [0.0, 1.5])
    def test_t_range(self, t):
        with pytest.raises(CalculationError):
            maximal_Mt(self._indicator(), t=t)
