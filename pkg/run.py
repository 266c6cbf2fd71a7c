#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
microlocal 演示脚本
合成 cusp 信号, 计算其 2-微局部范数并在 (s', σ) 平面上扫描发散边界
"""

import sys
from pathlib import Path

# 添加当前目录到路径
sys.path.insert(0, str(Path(__file__).parent))

from loguru import logger

from microlocal import MicrolocalEngine


def main():
    """主函数"""
    print("=" * 60)
    print("microlocal - 2-微局部空间计算演示")
    print("=" * 60)
    print()

    output_dir = "./output/demo"
    signal_path = f"{output_dir}/cusp.csv"

    try:
        print("📋 正在合成测试信号 cusp(α=0.5, x0=0.5)...")
        synth = MicrolocalEngine(config_dict={
            "command": "synth",
            "grid": {"N": 1 << 14},
            "options": {"kind": "cusp", "alpha": 0.5, "x0": 0.5, "out": signal_path},
            "output": {"dir": output_dir},
            "logging": {"level": "WARNING"},
        })
        synth.run()
        print(f"✅ 信号已保存: {signal_path}")
        print()

        print("📊 计算 A^0(B^{0.2}_{22})^{0.1}_{0.5} 范数 (LP 块)...")
        norm_engine = MicrolocalEngine(config_dict={
            "command": "norm",
            "params": {"family": "B", "s": 0.0, "s_prime": 0.2, "sigma": 0.1, "p": 2, "q": 2, "x0": 0.5},
            "options": {"signal": signal_path, "method": "lp"},
            "output": {"dir": output_dir},
            "logging": {"level": "WARNING"},
        })
        report, _ = norm_engine.run()
        print(f"   范数: {report['value']:.6g}")
        print(f"   发散标记: {'是' if report['diverging'] else '否'}")
        print()

        print("🔍 扫描 (s', σ) 平面...")
        print("-" * 60)
        scan_engine = MicrolocalEngine(config_dict={
            "command": "scan",
            "options": {
                "signal": signal_path,
                "s_primes": [0.0, 0.25, 0.5, 0.75],
                "sigmas": [0.0, 0.25, 0.5],
                "x0": 0.5,
            },
            "wavelet": {"vanishing_moments": 6},
            "output": {"dir": output_dir},
            "logging": {"level": "WARNING"},
        })
        scan, _ = scan_engine.run()
        for sigma, s_prime in scan["polyline"]:
            edge = f"{s_prime:g}" if s_prime is not None else "无"
            print(f"   σ={sigma:g}: 最小发散 s' = {edge}")
        print("-" * 60)
        print()

        print("💾 结果已保存:")
        print(f"   范数报告: {report['report_path']}")
        print(f"   扫描报告: {scan['report_path']}")
        for key, path in scan.get("files", {}).items():
            print(f"   {key}: {path}")
        print()

        print("=" * 60)
        print("✅ 演示完成！")
        print("=" * 60)
        return 0

    except FileNotFoundError as e:
        print(f"❌ 错误: 文件未找到: {e}")
        return 1
    except Exception as e:
        print(f"❌ 错误: {e}")
        logger.exception("演示过程出错")
        return 1


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
