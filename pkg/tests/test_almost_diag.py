"""
几乎对角矩阵测试
"""

import math

import pytest
from pytest import approx

from microlocal.almost_diag import (
    AlmostDiagSpec,
    CubeMatrix,
    CubeSet,
    ad_harness,
    apply_matrix,
    boundedness_harness,
    boundedness_thresholds,
    compose_check,
    compute_J,
    cube_signs,
    envelope,
    plateau_verdict,
    verify_almost_diagonal,
    violating_spec,
)
from microlocal.coeff_field import CoeffField
from microlocal.config import HarnessConfig
from microlocal.dyadic import DyadicCube, Region, enumerate_cubes
from microlocal.params import SpaceParams

WINDOW = Region.unit(1)


def _field(level_window=(0, 3)) -> CoeffField:
    entries = {DyadicCube(0, (0,)): 1.0, DyadicCube(2, (1,)): -2.0, DyadicCube(3, (6,)): 0.5}
    return CoeffField(entries, level_window, WINDOW)


class TestEnvelope:
    def test_values(self):
        spec = AlmostDiagSpec(r1=1.0, r2=2.0, L=3.0)
        fine = CubeSet.of([DyadicCube(2, (0,))])
        coarse = CubeSet.of([DyadicCube(0, (0,)), DyadicCube(0, (1,))])
        table = envelope(fine, coarse, spec)
        assert table[0, 0] == approx(0.25)
        assert table[0, 1] == approx(0.25 * 2.0 ** -3)
        assert envelope(coarse, fine, spec)[0, 0] == approx(0.25 ** 2)

    @pytest.mark.parametrize("fields", [{"r1": -1.0}, {"C": -1.0}, {"L": 0.0}])
    def test_invalid_spec(self, fields):
        values = {"r1": 1.0, "r2": 1.0, "L": 2.0}
        values.update(fields)
        with pytest.raises(ValueError):
            AlmostDiagSpec(**values)

    def test_signs_depend_only_on_cube(self):
        coarse = CubeSet.of(enumerate_cubes(2, WINDOW))
        both = CubeSet.of(enumerate_cubes(1, WINDOW) + enumerate_cubes(2, WINDOW))
        signs = cube_signs(coarse, seed=4)
        assert set(signs.tolist()) <= {1.0, -1.0}
        assert cube_signs(both, seed=4)[-len(coarse):].tolist() == signs.tolist()
        assert cube_signs(coarse, seed=4).tolist() == signs.tolist()


class TestCubeMatrix:
    def test_identity(self):
        c = _field()
        A = CubeMatrix.identity((0, 3), WINDOW)
        assert apply_matrix(A, c).entries == c.entries

    def test_from_table(self):
        P, Q = DyadicCube(0, (0,)), DyadicCube(2, (1,))
        A = CubeMatrix.from_table({(Q, P): 3.0}, (0, 3), WINDOW)
        out = apply_matrix(A, _field())
        assert out.entries == {Q: 3.0}

    def test_split_parts_sum(self):
        spec = AlmostDiagSpec(r1=1.0, r2=1.5, L=2.0)
        A = CubeMatrix.envelope_matrix(spec, (0, 3), WINDOW, seed=1)
        c = _field()
        total, parts = apply_matrix(A, c, split=True, reference_level=1)
        assert set(parts) == {"A0", "A1", "A2", "outside"}
        for cube in A.cubes.cubes:
            assert sum(part[cube] for part in parts.values()) == approx(total[cube], abs=1e-12)

    def test_cube_outside_window(self):
        c = CoeffField({DyadicCube(5, (0,)): 1.0}, (0, 5), WINDOW)
        with pytest.raises(ValueError):
            apply_matrix(CubeMatrix.identity((0, 3), WINDOW), c)

    def test_verify(self):
        spec = AlmostDiagSpec(r1=1.0, r2=2.0, L=2.5)
        report = verify_almost_diagonal(CubeMatrix.envelope_matrix(spec, (0, 3), WINDOW), spec)
        assert report["pass"]
        assert report["C"] == approx(1.0)
        assert report["truncation"]["cubes"] == 15

        doubled = AlmostDiagSpec(r1=1.0, r2=2.0, L=2.5, C=2.0)
        report = verify_almost_diagonal(CubeMatrix.envelope_matrix(doubled, (0, 3), WINDOW), spec)
        assert not report["pass"]
        assert report["C"] == approx(2.0)


class TestThresholds:
    def test_compute_J(self):
        assert compute_J(SpaceParams(family="F", p=2, q=0.5)) == approx(2.0)
        assert compute_J(SpaceParams(family="B", p=2, q=0.5)) == approx(1.0)

    def test_plain(self, unit_params):
        th = boundedness_thresholds(unit_params)
        assert th == {"r1": approx(0.0), "r2": approx(1.0), "L": approx(1.0), "J": approx(1.0)}

    def test_tilde_negative_sigma(self):
        params = SpaceParams(family="B", s_prime=0.25, sigma=-0.5, p=2, q=2, tilde=True)
        th = boundedness_thresholds(params)
        assert th["r1"] == approx(0.25)
        assert th["r2"] == approx(1.25)

    def test_violating_spec(self, unit_params):
        assert violating_spec(unit_params).r2 == approx(0.5)
        with pytest.raises(ValueError):
            violating_spec(SpaceParams(family="B", s_prime=0.8, p=2, q=2))

    @pytest.mark.parametrize(
        "ratios, verdict",
        [([1.0, 1.01], "bounded"), ([1.0, 2.0], "growing"), ([3.0], "bounded"), ([0.0, 1.0], "bounded")],
    )
    def test_plateau(self, ratios, verdict):
        assert plateau_verdict(ratios, 0.05)[0] == verdict


class TestHarness:
    def test_identity_is_bounded(self, unit_params, small_harness):
        report = boundedness_harness(None, unit_params, small_harness, depths=[2, 3], ensemble_size=2)
        assert report["spec"] == "identity"
        assert report["max_ratios"] == approx([1.0, 1.0])
        assert report["verdict"] == "bounded"

    def test_compose(self):
        a = AlmostDiagSpec(r1=2.0, r2=3.0, L=4.0)
        b = AlmostDiagSpec(r1=1.0, r2=4.0, L=5.0)
        report = compose_check(a, b, depths=(3, 4))
        assert report["target"] == {"r1": 1.0, "r2": 3.0, "L": 2.5, "C": 1.0}
        assert len(report["fitted_C"]) == 2
        assert all(math.isfinite(v) for v in report["fitted_C"])

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "family, tilde, s, s_prime, sigma, p, q",
        [
            ("B", False, 0.1, 0.2, 0.1, 2, 2),
            ("F", False, 0.1, 0.2, 0.1, 2, 2),
            ("B", False, 0.0, 0.0, 0.0, 1, 1),
            ("F", False, 0.0, 0.1, 0.2, 1, 1),
            ("F", False, 0.0, 0.2, 0.0, 2, 1),
            ("B", True, 0.0, 0.25, -0.5, 2, 2),
            ("F", True, 0.1, 0.2, 0.1, 2, 2),
            ("B", True, 0.0, 0.0, 0.3, 2, 1),
            ("B", False, 0.2, 0.1, 0.1, 2, 1),
            ("F", True, 0.0, 0.3, 0.2, 2, 2),
        ],
    )
    def test_ad_harness(self, family, tilde, s, s_prime, sigma, p, q):
        params = SpaceParams(family=family, tilde=tilde, s=s, s_prime=s_prime, sigma=sigma, p=p, q=q)
        harness = HarnessConfig(ensemble_size=8, seed=0)
        report = ad_harness(params, harness)
        assert report["bounded_run"]["depths"] == [6, 8, 10]
        assert report["bounded_run"]["verdict"] == "bounded"
        assert report["violated_run"]["verdict"] == "growing"
        assert report["pass"]

    def test_ad_harness_thresholds(self, unit_params):
        assert boundedness_thresholds(unit_params)["r2"] == approx(1.0)
