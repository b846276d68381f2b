"""命令行入口：tune / baseline / noise-sweep / report"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

# 添加当前目录到路径（用于直接运行）
if __name__ == "__main__":
    sys.path.insert(0, str(Path(__file__).parent.parent))

from qibonn import __version__
from qibonn.config import (
    ARCH_ALIASES,
    RunConfig,
    build_run_config,
    default_log_level,
    load_environment,
)
from qibonn.errors import ConfigError, DataError, QibonnError
from qibonn.harness import (
    build_report,
    run_baseline,
    run_noise_sweep,
    run_tune,
    write_report,
    write_run,
    write_sweep,
)
from qibonn.platform import get_output_root
from qibonn.qsim import NoiseSpec

logger = logging.getLogger("qibonn")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


def setup_logging(level: Optional[str] = None) -> None:
    """配置根日志（只在 CLI 中调用一次）"""
    level = (level or default_log_level()).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON 配置文件路径")
    parser.add_argument("--seed", type=int, help="主随机种子")
    parser.add_argument("--dataset", help="内置数据集名、synth:... 引用或 CSV/Excel 路径")
    parser.add_argument(
        "--arch", choices=sorted(ARCH_ALIASES), help="网络结构 shallow / deep / res"
    )
    parser.add_argument("--repeats", type=int, help="独立重复次数")
    parser.add_argument(
        "--out", help="输出目录（默认 $QIBONN_OUTPUT_ROOT 或 ./outputs 下自动命名）"
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="点路径配置覆盖，例如 optimizer.pop_size=6（可重复）",
    )
    parser.add_argument("--plot", action="store_true", help="同时输出 PNG 图表")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qibonn",
        description="量子启发的双层优化：联合调优特征选择与神经网络超参数",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level", default=None, help="日志级别（默认 $QIBONN_LOG_LEVEL 或 INFO）"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="QIBONN 调参 + 最终模型评估")
    _add_run_options(tune)

    baseline = sub.add_parser("baseline", help="基线：未调参 VNN 或同预算随机搜索")
    baseline.add_argument("kind", choices=["vnn", "random_search"])
    _add_run_options(baseline)

    sweep = sub.add_parser("noise-sweep", help="在多个噪声条件下重复调参")
    _add_run_options(sweep)
    sweep.add_argument(
        "--noise",
        action="append",
        default=[],
        metavar="KIND:STRENGTH",
        help="噪声条件，例如 bit_flip:0.005（可重复；缺省使用默认网格）",
    )

    report = sub.add_parser("report", help="汇总若干运行目录")
    report.add_argument("run_dirs", nargs="+", help="运行目录")
    report.add_argument("--out", default=None, help="汇总输出目录")
    report.add_argument("--plot", action="store_true", help="同时输出损失曲线 PNG")
    return parser


def _sugar_overrides(args: argparse.Namespace) -> List[str]:
    """--seed/--dataset/--arch/--repeats/--out 等价于对应的 --set"""
    sugar = []
    for flag, key in (("seed", "seed"), ("repeats", "repeats")):
        if getattr(args, flag) is not None:
            sugar.append(f"{key}={getattr(args, flag)}")
    if args.dataset is not None:
        sugar.append(f"dataset={json.dumps(args.dataset)}")
    if args.arch is not None:
        sugar.append(f"arch_kind={json.dumps(args.arch)}")
    if args.out is not None:
        sugar.append(f"output_dir={json.dumps(Path(args.out).as_posix())}")
    return sugar


def _run_config(args: argparse.Namespace) -> RunConfig:
    return build_run_config(args.config, list(args.overrides) + _sugar_overrides(args))


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "report":
        summary = build_report(args.run_dirs)
        if summary.table.empty:
            raise DataError("没有可汇总的运行目录")
        out = write_report(summary, args.out or get_output_root() / "report", plot=args.plot)
        print(f"汇总报告: {out}")
        return EXIT_OK

    cfg = _run_config(args)
    if args.command == "tune":
        report = run_tune(cfg)
        out = write_run(report, plot=args.plot)
    elif args.command == "baseline":
        report = run_baseline(cfg, args.kind)
        out = write_run(report, plot=args.plot)
    else:
        grid = [NoiseSpec.parse(text) for text in args.noise] or None
        sweep = run_noise_sweep(cfg, grid)
        out = write_sweep(sweep, plot=args.plot)
        print(sweep.deltas.to_string(index=False))
        print(f"结果目录: {out}")
        return EXIT_OK

    summary = report.summary()
    print(
        f"[{report.method}] 测试 ROC-AUC 均值 {summary['roc_auc']['mean']}, "
        f"PR-AUC 均值 {summary['pr_auc']['mean']}（{len(report.repeats)} 次重复）"
    )
    print(f"结果目录: {out}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI 主函数：0 成功，2 配置错误，3 数据错误，1 其他错误"""
    load_environment()
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        return dispatch(args)
    except ConfigError as e:
        logger.error("配置错误: %s", e)
        return EXIT_CONFIG
    except DataError as e:
        logger.error("数据错误: %s", e)
        return EXIT_DATA
    except QibonnError as e:
        logger.error("运行失败: %s", e)
        return EXIT_UNEXPECTED
    except Exception as e:
        logger.exception("未预期的错误: %s", e)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
