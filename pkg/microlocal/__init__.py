"""
microlocal - 2-微局部 Besov / Triebel-Lizorkin 型空间计算工具
二进立方体上的序列空间范数, Littlewood-Paley 与小波表征, 几乎对角算子, 嵌入关系与算子有界性的数值检验
"""

__version__ = "1.0.0"
__author__ = "microlocal contributors"

from .coeff_field import CoeffField, chain_norm, space_norm
from .core import MicrolocalEngine
from .dyadic import DyadicCube, Region
from .params import SpaceParams
from .presets import parse_preset
from .signal import SampledSignal
from .utils import quick_norm, quick_run, quick_synth, validate_config

__all__ = [
    "MicrolocalEngine",
    "SpaceParams",
    "DyadicCube",
    "Region",
    "CoeffField",
    "SampledSignal",
    "space_norm",
    "chain_norm",
    "parse_preset",
    "quick_norm",
    "quick_run",
    "quick_synth",
    "validate_config",
]
