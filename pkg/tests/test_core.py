"""
引擎分派测试
"""

import json

import pytest
from pytest import approx

from microlocal.coeff_field import CoeffField
from microlocal.core import MicrolocalEngine
from microlocal.dyadic import DyadicCube
from microlocal.exceptions import InvalidConfigError
from microlocal.output import load_report, report_payload

UNIT = {"family": "B", "s": 0.0, "s_prime": 0.0, "sigma": 0.0, "p": 2, "q": 2, "x0": [0.0]}


def _config(tmp_path, **sections):
    config = {"output": {"dir": str(tmp_path / "out")}, "logging": {"level": "ERROR"}}
    config.update(sections)
    return config


@pytest.fixture
def field_path(tmp_path) -> str:
    return str(CoeffField.single(DyadicCube(3, (0,)), 1.0).to_csv(str(tmp_path / "single.csv")))


class TestNorm:
    def test_field_file(self, tmp_path, field_path):
        engine = MicrolocalEngine(config_dict=_config(tmp_path, params=UNIT, options={"field": field_path}))
        report, passed = engine.run("norm")
        assert passed
        assert report["method"] == "field"
        assert report["value"] == approx(2 ** -1.5, rel=1e-12)
        assert load_report(report["report_path"])["command"] == "norm"

    def test_preset_with_override(self, tmp_path):
        engine = MicrolocalEngine(
            config_dict=_config(tmp_path, params={"preset": "morrey:u=4,p=2", "x0": [0.25]}),
        )
        params = engine.space_params()
        assert params.x0 == (0.25,)
        assert params.s == approx(0.25)

    def test_invalid_params(self, tmp_path):
        engine = MicrolocalEngine(config_dict=_config(tmp_path, params={"family": "G"}))
        with pytest.raises(InvalidConfigError):
            engine.space_params()

    def test_missing_signal_option(self, tmp_path):
        engine = MicrolocalEngine(config_dict=_config(tmp_path, params=UNIT))
        with pytest.raises(InvalidConfigError):
            engine.run("norm")

    def test_unknown_method(self, tmp_path):
        signal = tmp_path / "f.csv"
        engine = MicrolocalEngine(
            config_dict=_config(tmp_path, grid={"N": 256}, options={"kind": "smooth_bump", "out": str(signal)})
        )
        engine.run("synth")
        engine = MicrolocalEngine(
            config_dict=_config(tmp_path, params=UNIT, options={"signal": str(signal), "method": "fourier"})
        )
        with pytest.raises(InvalidConfigError):
            engine.run("norm")


class TestDispatch:
    def test_unknown_command(self, tmp_path):
        with pytest.raises(InvalidConfigError):
            MicrolocalEngine(config_dict=_config(tmp_path)).run("plot")

    def test_command_from_config(self, tmp_path, field_path):
        engine = MicrolocalEngine(
            config_dict=_config(tmp_path, command="norm", params=UNIT, options={"field": field_path})
        )
        report, _ = engine.run()
        assert report["seed"] == 0

    def test_env_config_path(self, tmp_path, monkeypatch, field_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(_config(tmp_path, command="norm", params=UNIT, options={"field": field_path})))
        monkeypatch.setenv("MICROLOCAL_CONFIG_PATH", str(path))
        engine = MicrolocalEngine(overrides={"harness": {"seed": 9}})
        assert engine.config.command == "norm"
        assert engine.config.harness.seed == 9

    def test_reproducible_payload(self, tmp_path, field_path):
        config = _config(tmp_path, params=UNIT, options={"field": field_path})
        first, _ = MicrolocalEngine(config_dict=config).run("norm")
        saved = report_payload(load_report(first["report_path"]))
        second, _ = MicrolocalEngine(config_dict=config).run("norm")
        assert report_payload(load_report(second["report_path"])) == saved

    def test_synth_writes_signal(self, tmp_path):
        engine = MicrolocalEngine(
            config_dict=_config(tmp_path, grid={"N": 512}, options={"kind": "step"})
        )
        report, passed = engine.run("synth")
        assert passed
        assert report["N"] == 512
        assert report["files"]["csv"].endswith("microlocal_step.csv")

    def test_embed_suite_single_case(self, tmp_path):
        engine = MicrolocalEngine(
            config_dict=_config(tmp_path, options={"case": "P1_trivial_sigma"}, harness={"ensemble_size": 3})
        )
        report, passed = engine.run("embed-suite")
        assert passed
        assert [r["case_id"] for r in report["cases"]] == ["P1_trivial_sigma"]
