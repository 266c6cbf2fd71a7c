"""
输出管理测试
"""

import numpy as np
import pytest

from microlocal import __version__
from microlocal.coeff_field import CoeffField
from microlocal.config import OutputConfig
from microlocal.dyadic import DyadicCube
from microlocal.engine import NormResult
from microlocal.exceptions import OutputError
from microlocal.output import OutputManager, load_report, report_payload, to_jsonable
from microlocal.signal import SampledSignal


@pytest.fixture
def manager(tmp_path) -> OutputManager:
    return OutputManager(OutputConfig(dir=str(tmp_path / "out"), filename_prefix="t"))


def test_to_jsonable():
    data = {
        "inf": np.float64(np.inf),
        "nan": float("nan"),
        "array": np.array([1, 2]),
        "tuple": (np.int64(3), np.bool_(True)),
        "result": NormResult(value=1.5),
        1: "key",
    }
    assert to_jsonable(data) == {
        "inf": "inf",
        "nan": "nan",
        "array": [1, 2],
        "tuple": [3, True],
        "result": {"value": 1.5, "diverging": False, "profile": []},
        "1": "key",
    }


def test_save_and_load_report(manager):
    path = manager.save_report("norm", {"value": 0.25, "levels": (0, 3)}, command="norm")
    assert path.endswith("t_norm.json")
    data = load_report(path)
    assert data["command"] == "norm"
    assert data["result"] == {"value": 0.25, "levels": [0, 3]}
    assert data["metadata"]["version"] == __version__
    assert report_payload(data) == {"command": "norm", "result": {"value": 0.25, "levels": [0, 3]}}


def test_payload_reproducible(manager):
    first = load_report(manager.save_report("a", {"x": [1.0, 2.0]}))
    second = load_report(manager.save_report("a", {"x": [1.0, 2.0]}))
    assert report_payload(first) == report_payload(second)


def test_json_disabled(tmp_path):
    manager = OutputManager(OutputConfig(dir=str(tmp_path), json_enabled=False))
    assert manager.save_report("norm", {}) is None


def test_save_report_failure(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    with pytest.raises(OutputError):
        OutputManager(OutputConfig(dir=str(blocker / "out"))).save_report("norm", {})


def test_load_missing(tmp_path):
    with pytest.raises(OutputError):
        load_report(str(tmp_path / "none.json"))


def test_data_files(manager):
    f = SampledSignal.from_function(lambda x: np.sin(2 * np.pi * x), N=32)
    files = manager.save_signal(f, name="sine")
    assert files["csv"].endswith("t_sine.csv")
    assert SampledSignal.from_csv(files["csv"]).N == 32

    c = CoeffField.single(DyadicCube(2, (1,)), 0.5)
    path = manager.save_field(c)["csv"]
    assert CoeffField.from_csv(path).entries == c.entries


def test_csv_disabled(tmp_path):
    manager = OutputManager(OutputConfig(dir=str(tmp_path), csv_enabled=False))
    assert manager.save_field(CoeffField.single(DyadicCube(0, (0,)))) == {}
