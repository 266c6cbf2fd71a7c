"""
工具函数模块
"""

from typing import Any, Dict, Optional, Tuple

from .coeff_field import CoeffField, space_norm
from .config import validate_config
from .core import MicrolocalEngine
from .params import SpaceParams
from .presets import parse_preset
from .regularity import TestSignalSpec, synth_signal
from .signal import SampledSignal


def quick_norm(c: CoeffField, preset: Optional[str] = None, **params: Any) -> float:
    """
    快速计算系数场的截断范数, 无需配置文件

    Args:
        c: 系数场
        preset: 预设, 如 "morrey:u=4,p=2"
        **params: SpaceParams 字段(给出 preset 时作为覆盖项)

    Returns:
        范数值
    """
    if preset:
        space = parse_preset(preset).with_(**params) if params else parse_preset(preset)
    else:
        space = SpaceParams(**params)
    return space_norm(c, space).value


def quick_synth(kind: str = "cusp", N: int = 1 << 14, T: float = 1.0, **fields: Any) -> SampledSignal:
    """快速合成测试信号, 例如 quick_synth("chirp", alpha=0.5, beta=1.0)"""
    return synth_signal(TestSignalSpec(kind=kind, **fields), N, T)


def quick_run(
    command: str,
    params: Optional[Dict[str, Any]] = None,
    output_dir: str = "./output",
    **options: Any,
) -> Tuple[Dict[str, Any], bool]:
    """
    快速执行子命令

    Args:
        command: norm / scan / embed-suite / ad-harness / op-check / synth / oracle
        params: 空间参数或 {"preset": ...}
        output_dir: 报告目录
        **options: 子命令参数

    Returns:
        (报告字典, 是否通过)
    """
    config_dict = {
        "command": command,
        "params": params or {},
        "options": options,
        "output": {"dir": output_dir},
    }
    engine = MicrolocalEngine(config_dict=config_dict)
    return engine.run()


__all__ = ["quick_norm", "quick_synth", "quick_run", "validate_config"]
