"""
命令行入口
microlocal <command> [options], 退出码: 0 完成/通过, 1 检验未通过, 2 配置/资源/IO 错误
"""

import argparse
import sys
from typing import Any, Dict, List, Optional

from loguru import logger

from .core import MicrolocalEngine
from .exceptions import HarnessAssertionError, MicrolocalException

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2

# 这些命令的 --x0 指空间参数的基点, 其余命令指测试信号/扫描的基点
_PARAM_X0 = ("norm", "ad-harness", "op-check")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="配置文件 (.json 或分节 key=value 文本)")
    parser.add_argument("--seed", type=int, help="随机种子")
    parser.add_argument("--ensemble-size", type=int, help="系综大小")
    parser.add_argument("--output-dir", help="报告输出目录")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="日志级别")
    parser.add_argument("--max-cubes", type=int, help="单层立方体枚举上限")
    parser.add_argument("--outer-levels", type=int, help="外层链向粗延伸的层数")


def _add_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", help='参数预设, 如 "morrey:u=4,p=2"')
    parser.add_argument("--family", choices=["B", "F"])
    parser.add_argument("--tilde", action="store_true", default=None, help="使用加权(tilde)版本")
    parser.add_argument("--s", type=float)
    parser.add_argument("--s-prime", type=float)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--p", help="可取 inf")
    parser.add_argument("--q", help="可取 inf")


def _add_signal(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kind", choices=["cusp", "chirp", "step", "smooth_bump"], default="cusp")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--radius", type=float)
    parser.add_argument("--N", type=int, help="采样点数(2的幂)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="microlocal", description="2-微局部 Besov / Triebel-Lizorkin 型空间计算工具")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="信号或系数场的截断范数")
    _add_common(p)
    _add_params(p)
    p.add_argument("--x0", help="基点, 多维用逗号分隔")
    p.add_argument("--signal", help="信号 CSV (附 JSON 说明文件)")
    p.add_argument("--field", help="系数场 CSV")
    p.add_argument("--method", choices=["lp", "phi", "wavelet"], default="lp")

    p = sub.add_parser("scan", help="(s', σ) 平面上的边界扫描")
    _add_common(p)
    p.add_argument("--signal", required=True)
    p.add_argument("--x0", type=float)
    p.add_argument("--s-primes", type=float, nargs="+")
    p.add_argument("--sigmas", type=float, nargs="+")
    p.add_argument("--depths", type=int, nargs="+")
    p.add_argument("--moments", type=int, help="小波消失矩")

    p = sub.add_parser("embed-suite", help="嵌入关系检验")
    _add_common(p)
    p.add_argument("--case", help="用例编号, 省略时执行全部")

    p = sub.add_parser("ad-harness", help="几乎对角矩阵有界性检验")
    _add_common(p)
    _add_params(p)
    p.add_argument("--x0")

    p = sub.add_parser("op-check", help="算子有界性检验")
    _add_common(p)
    _add_params(p)
    p.add_argument("--x0")
    p.add_argument("--operator", default="hilbert", help="identity / hilbert / bessel:<mu> / derivative:<k> / symbol:<file>")

    p = sub.add_parser("synth", help="合成测试信号")
    _add_common(p)
    _add_signal(p)
    p.add_argument("--x0", type=float)
    p.add_argument("--out", help="输出 CSV 路径")

    p = sub.add_parser("oracle", help="求积对照与金字塔变换系数比较")
    _add_common(p)
    _add_signal(p)
    p.add_argument("--x0", type=float)
    p.add_argument("--levels", type=int, nargs=2)
    p.add_argument("--moments", type=int, help="小波消失矩")
    p.add_argument("--save-field", action="store_true", default=None)

    return parser


def build_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """把命令行参数转为配置覆盖项, 未给出的参数为 None, 合并时忽略"""
    ns = vars(args)
    command = ns["command"]
    params: Dict[str, Any] = {}
    for key in ("preset", "family", "tilde", "s", "s_prime", "sigma", "p", "q"):
        if ns.get(key) is not None:
            params[key] = ns[key]

    options: Dict[str, Any] = {}
    for key in (
        "signal", "field", "method", "s_primes", "sigmas", "depths", "case", "operator",
        "kind", "alpha", "beta", "radius", "out", "levels", "save_field",
    ):
        if ns.get(key) is not None:
            options[key] = ns[key]
    if ns.get("x0") is not None:
        if command in _PARAM_X0:
            params["x0"] = ns["x0"]
        else:
            options["x0"] = ns["x0"]

    return {
        "command": command,
        "params": params,
        "options": options,
        "harness": {"seed": ns.get("seed"), "ensemble_size": ns.get("ensemble_size")},
        "truncation": {"max_cubes": ns.get("max_cubes"), "outer_levels": ns.get("outer_levels")},
        "wavelet": {"vanishing_moments": ns.get("moments")},
        "grid": {"N": ns.get("N")},
        "output": {"dir": ns.get("output_dir")},
        "logging": {"level": ns.get("log_level")},
    }


def main(argv: Optional[List[str]] = None) -> int:
    """命令行主函数, 返回退出码"""
    args = build_parser().parse_args(argv)
    try:
        engine = MicrolocalEngine(config_path=args.config, overrides=build_overrides(args))
        report, passed = engine.run(args.command)
        if not passed:
            raise HarnessAssertionError(f"{args.command} 检验未通过, 报告: {report.get('report_path')}")
        print(f"✅ {args.command} 完成: {report.get('report_path')}")
        return EXIT_OK
    except HarnessAssertionError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_ASSERTION
    except (MicrolocalException, OSError, ValueError) as e:
        print(f"❌ 错误: {e}", file=sys.stderr)
        logger.debug(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
