"""
核心引擎模块
MicrolocalEngine主类: 加载配置, 设置日志, 把子命令分派到各计算模块
"""

import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

from loguru import logger

from .almost_diag import ad_harness
from .coeff_field import CoeffField, space_norm, space_norm_report
from .config import ConfigLoader, merge_overrides
from .embeddings import CASE_IDS, build_case, run_case
from .exceptions import InvalidConfigError, MicrolocalException
from .lp_transform import LPPair, build_lp_pair, function_space_norm, phi_transform_coeffs
from .operators import multiplier_order_slope, operator_boundedness_check, parse_operator
from .output import OutputManager
from .params import SpaceParams
from .presets import parse_preset
from .regularity import FrontierScanConfig, TestSignalSpec, frontier_scan, oracle_coeffs, synth_signal
from .signal import SampledSignal
from .wavelets import WaveletBasis, build_wavelet_basis, dwt_analyze

COMMANDS = ("norm", "scan", "embed-suite", "ad-harness", "op-check", "synth", "oracle")


class MicrolocalEngine:
    """2-微局部空间计算引擎"""

    def __init__(
        self,
        config_path: Optional[str] = None,
        config_dict: Optional[Dict[str, Any]] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ):
        """
        初始化引擎

        Args:
            config_path: 配置文件路径(.json 或分节 key=value 文本)
            config_dict: 配置字典(可选, 如果提供则不读取文件)
            overrides: 命令行覆盖项
        """
        overrides = overrides or {}
        if config_dict is not None:
            self.config = ConfigLoader.load_from_dict(merge_overrides(config_dict, overrides))
        else:
            # 检查环境变量
            config_path = config_path or os.getenv("MICROLOCAL_CONFIG_PATH")
            if config_path:
                self.config = ConfigLoader.load_from_file(config_path, overrides)
            else:
                self.config = ConfigLoader.load_from_dict(merge_overrides({}, overrides))

        self._setup_logging()
        self.output_manager = OutputManager(self.config.output)
        self._pair: Optional[LPPair] = None
        self._basis: Optional[WaveletBasis] = None

    def _setup_logging(self) -> None:
        """设置日志"""
        logging_config = self.config.logging

        # 移除默认handler
        logger.remove()

        # 添加控制台输出
        logger.add(
            sys.stderr,
            level=logging_config.level,
            format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>",
        )

        # 添加文件输出
        if logging_config.filepath:
            log_file = Path(logging_config.filepath)
            log_file.parent.mkdir(parents=True, exist_ok=True)
            logger.add(
                log_file,
                level=logging_config.level,
                format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {message}",
                rotation=logging_config.rotation,
                retention=logging_config.retention,
            )

    # ------------------------------------------------------------ 公共组件

    @property
    def options(self) -> Dict[str, Any]:
        return self.config.options

    @property
    def pair(self) -> LPPair:
        if self._pair is None:
            self._pair = build_lp_pair(self.config.lp.smoothness_order)
        return self._pair

    @property
    def basis(self) -> WaveletBasis:
        if self._basis is None:
            self._basis = build_wavelet_basis(self.config.wavelet.vanishing_moments)
        return self._basis

    def space_params(self) -> SpaceParams:
        """
        由配置的 params 节得到空间参数; 含 preset 时先展开预设, 其余键作为覆盖项

        Raises:
            InvalidConfigError: 参数不合法
        """
        params = dict(self.config.params)
        preset = params.pop("preset", None)
        try:
            if preset:
                return parse_preset(preset).with_(**params) if params else parse_preset(preset)
            return SpaceParams(**params)
        except InvalidConfigError:
            raise
        except ValueError as e:
            raise InvalidConfigError(f"空间参数不合法: {e}")

    def _require_option(self, key: str) -> Any:
        if self.options.get(key) is None:
            raise InvalidConfigError(f"缺少参数: {key}")
        return self.options[key]

    def _signal_spec(self) -> TestSignalSpec:
        keys = ("kind", "alpha", "beta", "x0", "radius", "mean_zero")
        data = {k: self.options[k] for k in keys if self.options.get(k) is not None}
        try:
            return TestSignalSpec(**data)
        except ValueError as e:
            raise InvalidConfigError(f"测试信号参数不合法: {e}")

    # ------------------------------------------------------------ 子命令

    def norm(self) -> Tuple[Dict[str, Any], bool]:
        """信号文件(LP 块 / φ-变换 / 小波系数)或系数场文件的截断范数"""
        params = self.space_params()
        truncation = self.config.truncation
        method = self.options.get("method", "lp")

        if self.options.get("field"):
            c = CoeffField.from_csv(self.options["field"])
            report = space_norm_report(c, params, truncation)
            report["method"] = "field"
            return report, True

        f = SampledSignal.from_csv(self._require_option("signal"))
        if method == "lp":
            result = function_space_norm(f, params, self.pair, truncation=truncation)
        elif method == "phi":
            result = space_norm(phi_transform_coeffs(f, self.pair), params, truncation)
        elif method == "wavelet":
            result = space_norm(dwt_analyze(f, self.basis), params, truncation)
        else:
            raise InvalidConfigError(f"未知的范数计算方式: {method}, 可选 lp/phi/wavelet")

        report = result.to_dict()
        report.update(
            {
                "method": method,
                "params": params.describe(),
                "signal": {"N": f.N, "T": f.T, "n": f.n},
                "truncation": truncation.model_dump(),
            }
        )
        if method == "wavelet":
            report["basis"] = self.basis.describe()
        return report, True

    def scan(self) -> Tuple[Dict[str, Any], bool]:
        """(s', σ) 平面上的边界扫描"""
        keys = set(FrontierScanConfig.model_fields)
        data = {k: v for k, v in self.options.items() if k in keys and v is not None}
        try:
            scan_config = FrontierScanConfig(**data)
        except ValueError as e:
            raise InvalidConfigError(f"扫描参数不合法: {e}")
        f = SampledSignal.from_csv(self._require_option("signal"))
        result = frontier_scan(f, scan_config, self.basis, self.config.truncation)
        report = result.to_dict()
        report["truncation"] = self.config.truncation.model_dump()
        report["files"] = self.output_manager.save_scan(result)
        return report, True

    def embed_suite(self) -> Tuple[Dict[str, Any], bool]:
        """嵌入关系检验, case 为空时执行全部用例"""
        case = self.options.get("case")
        case_ids = [case] if case else list(CASE_IDS)
        harness = self.config.harness
        reports = []
        for case_id in case_ids:
            report = run_case(build_case(case_id), harness.ensemble_size, harness.seed, harness, self.config.truncation)
            logger.info(f"{case_id}: {'通过' if report['pass'] else '未通过'}")
            reports.append(report)
        passed = all(r["pass"] for r in reports)
        return {"cases": reports, "pass": passed}, passed

    def ad_harness(self) -> Tuple[Dict[str, Any], bool]:
        """几乎对角矩阵有界性检验(满足阈值的矩阵应有界, 违背阈值的应增长)"""
        report = ad_harness(self.space_params(), self.config.harness, self.config.truncation)
        report["truncation"] = self.config.truncation.model_dump()
        return report, bool(report["pass"])

    def op_check(self) -> Tuple[Dict[str, Any], bool]:
        """算子在 A^s(E^{s'})^σ → A^s(E^{s'-μ})^σ 上的有界性检验"""
        operator = parse_operator(self.options.get("operator", "hilbert"))
        params_in = self.space_params()
        params_out = params_in.with_(s_prime=params_in.s_prime - operator.order)
        report = operator_boundedness_check(
            operator, params_in, params_out, self.pair, self.config.harness, self.config.truncation
        )
        report["operator"] = {"name": operator.name, "order": operator.order, "moment_hypothesis": operator.moment_hypothesis}
        report["order_slope"] = multiplier_order_slope(operator)
        report["truncation"] = self.config.truncation.model_dump()
        passed = report["verdict"] == "bounded"
        report["pass"] = passed
        return report, passed

    def synth(self) -> Tuple[Dict[str, Any], bool]:
        """合成测试信号并写出 CSV"""
        spec = self._signal_spec()
        grid = self.config.grid
        f = synth_signal(spec, grid.N, grid.T, self.config.harness.interior_margin)
        out = self.options.get("out")
        if out:
            csv_path, sidecar = f.to_csv(out)
            files = {"csv": str(csv_path), "sidecar": str(sidecar)}
            logger.info(f"信号已保存: {csv_path}")
        else:
            files = self.output_manager.save_signal(f, name=spec.kind)
        report = {"signal": spec.model_dump(), "N": grid.N, "T": grid.T, "files": files}
        return report, True

    def oracle(self) -> Tuple[Dict[str, Any], bool]:
        """求积对照系数与金字塔变换系数的最大相对偏差"""
        spec = self._signal_spec()
        grid = self.config.grid
        levels = tuple(self.options.get("levels") or (0, 8))
        c_oracle, quad = oracle_coeffs(spec, self.basis, levels, grid.T)
        f = synth_signal(spec, grid.N, grid.T, self.config.harness.interior_margin)
        c_dwt = dwt_analyze(f, self.basis, levels)

        scale = max(c_oracle.abs_max(), 1e-300)
        cubes = set(c_oracle.entries) | set(c_dwt.entries)
        deviation = max((abs(c_oracle[q] - c_dwt[q]) for q in cubes), default=0.0) / scale
        tolerance = float(self.options.get("tolerance", 1e-6))
        passed = quad["converged"] and deviation <= tolerance
        report = {
            "signal": spec.model_dump(),
            "basis": self.basis.describe(),
            "levels": list(levels),
            "N": grid.N,
            "quadrature": quad,
            "max_relative_deviation": float(deviation),
            "tolerance": tolerance,
            "pass": passed,
        }
        if self.options.get("save_field"):
            report["files"] = self.output_manager.save_field(c_oracle, name="oracle")
        return report, passed

    # ------------------------------------------------------------ 分派

    def run(self, command: Optional[str] = None) -> Tuple[Dict[str, Any], bool]:
        """
        执行子命令并保存报告

        Returns:
            (报告字典, 是否通过)

        Raises:
            InvalidConfigError: 未知命令或参数不合法
            MicrolocalException: 计算过程出错
        """
        command = command or self.config.command
        handlers: Dict[str, Callable[[], Tuple[Dict[str, Any], bool]]] = {
            "norm": self.norm,
            "scan": self.scan,
            "embed-suite": self.embed_suite,
            "ad-harness": self.ad_harness,
            "op-check": self.op_check,
            "synth": self.synth,
            "oracle": self.oracle,
        }
        if command not in handlers:
            raise InvalidConfigError(f"未知的命令: {command}, 可选: {list(COMMANDS)}")

        start_time = time.time()
        logger.info(f"开始执行: {command}")
        try:
            report, passed = handlers[command]()
            report.setdefault("seed", self.config.harness.seed)
            path = self.output_manager.save_report(command.replace("-", "_"), report, command)
            report["report_path"] = path
        except MicrolocalException as e:
            logger.error(f"{command} 执行失败: {e}")
            raise

        logger.info(f"{command} 完成, 总耗时: {time.time() - start_time:.2f}秒")
        return report, passed
