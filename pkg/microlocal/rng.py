"""
随机数模块
所有随机性都从一个种子经命名子生成器派生
"""

import zlib

import numpy as np


def derive_rng(seed: int, name: str) -> np.random.Generator:
    """由 (seed, name) 确定性地派生独立的生成器"""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
