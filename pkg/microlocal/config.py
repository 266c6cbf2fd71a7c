"""
配置管理模块
负责加载、验证和管理配置文件(JSON 或分节 key=value 文本)
"""

import configparser
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator
from loguru import logger

from .exceptions import InvalidConfigError, ConfigNotFoundError


def _is_power_of_two(value: float) -> bool:
    if value <= 0:
        return False
    exponent = math.log2(value)
    return abs(exponent - round(exponent)) < 1e-12


class TruncationConfig(BaseModel):
    """截断配置"""
    j_min: int = Field(default=0, ge=-30, le=30, description="最粗层级")
    j_max: int = Field(default=10, ge=-30, le=30, description="最细层级")
    outer_levels: int = Field(default=6, ge=0, le=30, description="外层链在场窗口之外再向粗延伸的层数")
    quadrature_refine: int = Field(default=2, ge=0, le=6, description="积分节点比最细层级再细化的层数")
    max_cubes: int = Field(default=1 << 20, ge=1, description="单层枚举的立方体上限")
    divergence_span: int = Field(default=4, ge=1, le=20, description="发散判定使用的链层数")
    divergence_factor: float = Field(default=1.5, gt=1.0, description="发散判定的增长倍数")

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _check_levels(self) -> "TruncationConfig":
        if self.j_min > self.j_max:
            raise ValueError(f"j_min={self.j_min} 大于 j_max={self.j_max}")
        return self


class GridConfig(BaseModel):
    """采样网格配置"""
    N: int = Field(default=4096, ge=2, le=1 << 22, description="每个坐标轴的采样点数")
    T: float = Field(default=1.0, gt=0, description="周期环面边长")
    n: int = Field(default=1, ge=1, le=3)

    class Config:
        extra = "forbid"

    @field_validator("N")
    @classmethod
    def _n_power(cls, v: int) -> int:
        if not _is_power_of_two(v):
            raise ValueError(f"N 必须是2的幂: {v}")
        return v

    @field_validator("T")
    @classmethod
    def _t_power(cls, v: float) -> float:
        if not _is_power_of_two(v):
            raise ValueError(f"T 必须是2的幂: {v}")
        return v


class LPConfig(BaseModel):
    """Littlewood-Paley 配置"""
    smoothness_order: Optional[int] = Field(default=None, ge=2, le=40, description="None 表示 C^∞ 指数型剖面")

    class Config:
        extra = "forbid"


class WaveletConfig(BaseModel):
    """小波配置"""
    vanishing_moments: int = Field(default=4, ge=1, le=10)

    class Config:
        extra = "forbid"


class HarnessConfig(BaseModel):
    """检验框架配置"""
    plateau_tolerance: float = Field(default=0.05, gt=0, lt=1)
    depths: List[int] = Field(default_factory=lambda: [6, 8, 10])
    ensemble_size: int = Field(default=50, ge=1, le=10000)
    density: float = Field(default=0.3, gt=0, le=1, description="随机场非零密度 ρ")
    seed: int = Field(default=0, ge=0)
    interior_margin: float = Field(default=0.05, ge=0, lt=0.5)

    class Config:
        extra = "forbid"

    @field_validator("depths")
    @classmethod
    def _depths_increasing(cls, v: List[int]) -> List[int]:
        if len(v) < 2 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"depths 必须严格递增且至少两个: {v}")
        return v


class LoggingConfig(BaseModel):
    """日志配置"""
    level: str = Field(default="INFO", pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")
    filepath: Optional[str] = None
    rotation: str = "10 MB"
    retention: str = "7 days"

    class Config:
        extra = "forbid"


class OutputConfig(BaseModel):
    """输出配置"""
    dir: str = "./output"
    filename_prefix: str = "microlocal"
    json_enabled: bool = True
    csv_enabled: bool = True

    class Config:
        extra = "forbid"


class Config(BaseModel):
    """完整配置模型"""
    command: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict, description="空间参数或预设")
    options: Dict[str, Any] = Field(default_factory=dict, description="子命令专用参数")
    truncation: TruncationConfig = TruncationConfig()
    grid: GridConfig = GridConfig()
    lp: LPConfig = LPConfig()
    wavelet: WaveletConfig = WaveletConfig()
    harness: HarnessConfig = HarnessConfig()
    logging: LoggingConfig = LoggingConfig()
    output: OutputConfig = OutputConfig()

    class Config:
        extra = "forbid"


def _parse_value(raw: str) -> Any:
    """把文本值解析为 JSON 标量/列表, 否则保持字符串"""
    text = raw.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text and not text.startswith(("{", "[")):
        # 只有每一项都是 JSON 标量时才当作列表, 预设字符串 "name:k=v,k=v" 保持原样
        try:
            return [json.loads(part) for part in text.split(",") if part.strip()]
        except json.JSONDecodeError:
            return text
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    return text


def parse_sectioned_text(text: str) -> Dict[str, Any]:
    """
    解析分节 key=value 文本

    节头之前的键放在顶层, [section] 下的键放在同名字典中。
    """
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string("[__root__]\n" + text)
    result: Dict[str, Any] = {}
    for section in parser.sections():
        values = {key: _parse_value(value) for key, value in parser.items(section)}
        if section == "__root__":
            result.update(values)
        else:
            result.setdefault(section, {}).update(values)
    return result


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并, overrides 中值为 None 的键被忽略"""
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            base_value = merged.get(key)
            merged[key] = merge_overrides(base_value if isinstance(base_value, dict) else {}, value)
        else:
            merged[key] = value
    return merged


class ConfigLoader:
    """配置加载器"""

    @staticmethod
    def read_file(config_path: str) -> Dict[str, Any]:
        """
        读取配置文件为字典(不校验)

        Raises:
            ConfigNotFoundError: 配置文件不存在
            InvalidConfigError: 配置格式错误
        """
        path = Path(config_path)
        if not path.exists():
            raise ConfigNotFoundError(f"配置文件不存在: {config_path}")

        try:
            text = path.read_text(encoding="utf-8")
        except Exception as e:
            raise InvalidConfigError(f"读取配置文件失败: {e}")

        if path.suffix.lower() == ".json":
            try:
                return json.loads(text)
            except json.JSONDecodeError as e:
                raise InvalidConfigError(f"配置文件JSON格式错误: {e}")
        try:
            return parse_sectioned_text(text)
        except configparser.Error as e:
            raise InvalidConfigError(f"配置文件格式错误: {e}")

    @staticmethod
    def load_from_file(config_path: str, overrides: Optional[Dict[str, Any]] = None) -> Config:
        """
        从文件加载配置, 命令行参数覆盖文件中的值

        Args:
            config_path: 配置文件路径
            overrides: 覆盖项

        Returns:
            Config对象
        """
        config_dict = ConfigLoader.read_file(config_path)
        if overrides:
            config_dict = merge_overrides(config_dict, overrides)
        return ConfigLoader.load_from_dict(config_dict)

    @staticmethod
    def load_from_dict(config_dict: Dict[str, Any]) -> Config:
        """
        从字典加载配置

        Raises:
            InvalidConfigError: 配置格式错误
        """
        try:
            config = Config(**config_dict)
            ConfigLoader._validate(config)
            return config
        except InvalidConfigError:
            raise
        except Exception as e:
            raise InvalidConfigError(f"配置验证失败: {e}")

    @staticmethod
    def _validate(config: Config) -> None:
        """验证配置的合理性"""
        trunc = config.truncation
        if trunc.j_max + trunc.quadrature_refine > 24:
            raise InvalidConfigError(
                f"积分节点层级过细: j_max={trunc.j_max}, quadrature_refine={trunc.quadrature_refine}"
            )
        if len(config.harness.depths) < 3:
            logger.warning(f"平台判定建议至少三个深度, 当前: {config.harness.depths}")

        if config.logging.filepath:
            Path(config.logging.filepath).parent.mkdir(parents=True, exist_ok=True)


def validate_config(config_path: str) -> Tuple[bool, Optional[str]]:
    """
    验证配置文件是否合法

    Returns:
        (是否合法, 错误信息)
    """
    try:
        ConfigLoader.load_from_file(config_path)
        return True, None
    except Exception as e:
        return False, str(e)
