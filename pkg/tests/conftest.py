"""
共享夹具
"""

import pytest
from loguru import logger

from microlocal.config import HarnessConfig, TruncationConfig
from microlocal.dyadic import DyadicCube
from microlocal.lp_transform import build_lp_pair
from microlocal.params import SpaceParams
from microlocal.wavelets import build_wavelet_basis


@pytest.fixture(autouse=True)
def quiet_logging():
    """测试时只保留警告以上的日志"""
    logger.remove()
    logger.add(lambda message: None, level="WARNING")
    yield


@pytest.fixture
def unit_params() -> SpaceParams:
    return SpaceParams(family="B", s=0.0, s_prime=0.0, sigma=0.0, p=2, q=2, x0=(0.0,))


@pytest.fixture
def q0() -> DyadicCube:
    """Q0 = [0, 2^{-3})"""
    return DyadicCube(3, (0,))


@pytest.fixture
def small_harness() -> HarnessConfig:
    return HarnessConfig(ensemble_size=8, depths=[4, 5, 6], seed=3)


@pytest.fixture
def truncation() -> TruncationConfig:
    return TruncationConfig()


@pytest.fixture(scope="session")
def pair():
    return build_lp_pair()


@pytest.fixture(scope="session")
def db4():
    return build_wavelet_basis(4)


@pytest.fixture(scope="session")
def db6():
    return build_wavelet_basis(6)


@pytest.fixture(scope="session")
def db10():
    return build_wavelet_basis(10)
