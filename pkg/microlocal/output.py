"""
输出管理模块
负责JSON报告以及信号/系数场/扫描数据文件的输出
"""

import json
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from loguru import logger

from . import __version__
from .coeff_field import CoeffField
from .config import OutputConfig
from .exceptions import OutputError
from .regularity import FrontierScan
from .signal import SampledSignal


def to_jsonable(obj: Any) -> Any:
    """递归转换为可JSON序列化的对象; ±inf/nan 写作字符串"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def report_payload(data: Dict[str, Any]) -> Dict[str, Any]:
    """去掉 metadata 后的确定性部分, 用于复现比较"""
    return {k: v for k, v in data.items() if k != "metadata"}


class OutputManager:
    """输出管理器"""

    def __init__(self, config: Optional[OutputConfig] = None):
        """
        Args:
            config: 输出配置
        """
        self.config = config or OutputConfig()
        self.output_dir = Path(self.config.dir)

    def _path(self, name: str, suffix: str) -> Path:
        return self.output_dir / f"{self.config.filename_prefix}_{name}{suffix}"

    def save_report(self, name: str, result: Dict[str, Any], command: Optional[str] = None) -> Optional[str]:
        """保存JSON报告: 确定性结果放在 "result", 时间戳放在 "metadata" """
        if not self.config.json_enabled:
            return None
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            filepath = self._path(name, ".json")

            output_data = {
                "command": command or name,
                "result": to_jsonable(result),
                "metadata": {
                    "version": __version__,
                    "timestamp": datetime.now().isoformat(),
                    "generated_by": "microlocal",
                },
            }

            with open(filepath, "w", encoding="utf-8") as f:
                json.dump(output_data, f, ensure_ascii=False, indent=2, sort_keys=True)

            logger.info(f"JSON结果已保存: {filepath}")
            return str(filepath)

        except Exception as e:
            raise OutputError(f"保存JSON文件失败: {e}")

    def save_signal(self, signal: SampledSignal, name: str = "signal") -> Dict[str, str]:
        if not self.config.csv_enabled:
            return {}
        csv_path, sidecar = signal.to_csv(str(self._path(name, ".csv")))
        logger.info(f"信号已保存: {csv_path}")
        return {"csv": str(csv_path), "sidecar": str(sidecar)}

    def save_field(self, c: CoeffField, name: str = "coeffs") -> Dict[str, str]:
        if not self.config.csv_enabled:
            return {}
        path = c.to_csv(str(self._path(name, ".csv")))
        logger.info(f"系数场已保存: {path}")
        return {"csv": str(path)}

    def save_scan(self, scan: FrontierScan, name: str = "scan") -> Dict[str, str]:
        if not self.config.csv_enabled:
            return {}
        csv_path = scan.to_csv(str(self._path(name, "_slopes.csv")))
        dat_path = scan.to_gnuplot(str(self._path(name, ".dat")))
        logger.info(f"扫描数据已保存: {csv_path}, {dat_path}")
        return {"csv": str(csv_path), "gnuplot": str(dat_path)}


def load_report(path: str) -> Dict[str, Any]:
    """
    Raises:
        OutputError: 文件不存在或不是合法JSON
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise OutputError(f"读取报告失败: {e}")
