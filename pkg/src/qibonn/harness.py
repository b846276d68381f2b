"""实验编排：调参运行、基线（VNN / 随机搜索）、噪声扫描、结果落盘与汇总报告"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import __version__
from . import optimizer
from .config import RunConfig
from .data_loader import BUNDLED, bundled, load_csv
from .datasets import Dataset, parse_synth_ref, split, synthesize
from .encoding import HyperparamVector, SpaceSpec, decode
from .errors import ConfigError, QibonnError
from .exporters import Exporter, markdown_table
from .nn import final_fit, make_objective
from .optimizer import EvalRecord, ObjectiveLike, evaluate_batch
from .platform import get_output_dir, get_runtime_info
from .qsim import NoiseKind, NoiseSpec, bits_to_str
from .render import ChartRenderer

logger = logging.getLogger(__name__)

METHODS = ("qibonn", "vnn", "random_search")

CURVE_COLUMNS = ["repeat", "epoch", "train_loss", "holdout_loss"]

# 未调参基线：各范围的算术/几何中点，使用全部特征
VNN_DEFAULTS = {
    "dropout": 0.25,
    "hidden_width": 36,
    "learning_rate": 3.16e-3,
    "batch_size": 128,
    "weight_decay": 1e-4,
    "n_hidden_layers": 2,
}

DEFAULT_NOISE_GRID = (
    NoiseSpec(),
    NoiseSpec(NoiseKind.BIT_FLIP, 0.001),
    NoiseSpec(NoiseKind.BIT_FLIP, 0.005),
    NoiseSpec(NoiseKind.BIT_FLIP, 0.01),
    NoiseSpec(NoiseKind.DEPOLARIZING, 0.005),
    NoiseSpec(NoiseKind.DEPOLARIZING, 0.02),
    NoiseSpec(NoiseKind.AMPLITUDE_DAMPING, 0.01),
    NoiseSpec(NoiseKind.AMPLITUDE_DAMPING, 0.05),
)


@dataclass
class RepeatResult:
    """一次重复：最优超参数、测试集指标、评估轨迹与最终模型损失曲线"""

    repeat: int
    seed: int
    split_seed: int
    best_h: HyperparamVector
    best_val_fitness: Optional[float]
    test: Dict[str, Any]
    trace: List[EvalRecord] = field(default_factory=list)
    curves: Dict[str, List[float]] = field(default_factory=dict)
    mask_recall: Optional[float] = None

    @property
    def n_evaluations(self) -> int:
        return len(self.trace)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "repeat": self.repeat,
            "seed": self.seed,
            "split_seed": self.split_seed,
            "best_h": self.best_h.to_dict(),
            "best_val_roc_auc": None if self.best_val_fitness is None else -self.best_val_fitness,
            "test": self.test,
            "n_evaluations": self.n_evaluations,
            "mask_recall": self.mask_recall,
            "curves": self.curves,
        }


@dataclass
class RunReport:
    method: str
    config: RunConfig
    dataset: Dict[str, Any]
    repeats: List[RepeatResult]
    wall_clock: float = 0.0

    @property
    def budget(self) -> int:
        return 0 if self.method == "vnn" else self.config.optimizer.budget

    def metric_values(self, metric: str) -> List[float]:
        return [r.test[metric] for r in self.repeats if r.test.get(metric) is not None]

    def summary(self) -> Dict[str, Dict[str, Optional[float]]]:
        """各指标跨重复的均值与（总体）标准差"""
        out = {}
        for metric in ("roc_auc", "pr_auc"):
            values = self.metric_values(metric)
            out[metric] = {
                "mean": float(np.mean(values)) if values else None,
                "std": float(np.std(values)) if values else None,
                "n": len(values),
            }
        return out

    def curves_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.repeats:
            train_curve = r.curves.get("train_loss", [])
            holdout_curve = r.curves.get("holdout_loss", [])
            for epoch, losses in enumerate(zip(train_curve, holdout_curve), start=1):
                rows.append([r.repeat, epoch, *losses])
        return pd.DataFrame(rows, columns=CURVE_COLUMNS)

    def to_dict(self) -> Dict[str, Any]:
        # 不含时间戳与耗时，保证同配置同种子时逐字节一致
        return {
            "method": self.method,
            "dataset": self.dataset,
            "arch_kind": self.config.arch_kind,
            "budget": self.budget,
            "n_evaluations": sum(r.n_evaluations for r in self.repeats),
            "repeats": [r.to_dict() for r in self.repeats],
            "summary": self.summary(),
            "config": self.config.to_dict(),
        }


def resolve_dataset(cfg: RunConfig) -> Dataset:
    """内置名 / 'synth:...' / 文件路径 → Dataset"""
    ref = cfg.dataset
    if ref in BUNDLED:
        return bundled(ref)
    if ref.startswith("synth:"):
        return synthesize(**parse_synth_ref(ref), name=ref)
    if not cfg.label_column:
        available = sorted(BUNDLED)
        raise ConfigError(f"'{ref}' 不是内置数据集，需要指定 label_column（内置: {available}）")
    return load_csv(
        ref, cfg.label_column, cfg.categorical_columns, cfg.positive_label, cfg.drop_columns
    )


def mask_recall(ds: Dataset, h: HyperparamVector) -> Optional[float]:
    """最优掩码选中的已知有效特征比例（只对带有效特征元数据的合成数据有意义）"""
    if not ds.informative:
        return None
    return sum(h.feature_mask[i] for i in ds.informative) / len(ds.informative)


def vnn_hyperparams(n_feat: int) -> HyperparamVector:
    return HyperparamVector(tuple([1] * n_feat), dict(VNN_DEFAULTS))


def random_search(
    space: SpaceSpec,
    obj: ObjectiveLike,
    budget: int,
    seed: int,
    batch_size: int,
    n_jobs: int = 1,
) -> Tuple[HyperparamVector, List[EvalRecord]]:
    """与 QIBONN 同一条 解码 + 目标函数 路径的均匀随机搜索，评估次数恰为 budget

    轨迹按 batch_size 分组编号，便于与 QIBONN 的 (iteration, particle) 对齐。
    """
    rng = np.random.default_rng(seed)
    trace: List[EvalRecord] = []
    best_h, best_fitness = None, np.inf
    for start in range(0, budget, batch_size):
        count = min(batch_size, budget - start)
        bits = [rng.integers(0, 2, size=space.total_bits).astype(np.int8) for _ in range(count)]
        hs = [decode(b, space) for b in bits]
        for offset, (b, h, result) in enumerate(zip(bits, hs, evaluate_batch(obj, hs, n_jobs))):
            record = EvalRecord(
                start // batch_size,
                offset,
                bits_to_str(b),
                h,
                result.fitness,
                result.metrics,
                result.error,
            )
            trace.append(record)
            if best_h is None or result.fitness < best_fitness:
                best_h, best_fitness = h, result.fitness
    logger.info("随机搜索完成: %d 次评估, 最优 J=%.6f", len(trace), best_fitness)
    return best_h, trace


def _best_fitness(trace: Sequence[EvalRecord]) -> Optional[float]:
    finite = [r.fitness for r in trace if np.isfinite(r.fitness)]
    return min(finite) if finite else None


def _run(cfg: RunConfig, method: str) -> RunReport:
    if method not in METHODS:
        raise ConfigError(f"未知的方法: {method}（可用: {list(METHODS)}）")
    started = time.perf_counter()
    ds = resolve_dataset(cfg)
    logger.info("数据集 %s: %d 样本, %d 特征, %d 类", ds.name, ds.n_samples, ds.n_features, ds.k)

    repeats = []
    for r in range(cfg.repeats):
        seed = cfg.seed + r
        split_spec = cfg.split_for(r)
        parts = split(ds, split_spec)
        space = cfg.space_for(ds.n_features)
        objective = make_objective(parts.tuning, cfg.arch_kind, cfg.inner_epochs, seed)
        opt_cfg = cfg.optimizer_for(r)

        if method == "qibonn":
            best_h, trace = optimizer.run(space, objective, opt_cfg)
        elif method == "random_search":
            best_h, trace = random_search(
                space, objective, opt_cfg.budget, seed, opt_cfg.pop_size, cfg.n_jobs
            )
        else:
            best_h, trace = vnn_hyperparams(ds.n_features), []

        fit = final_fit(best_h, parts, cfg.arch_kind, seed, cfg.final_epochs)
        test = dict(fit.metrics)
        curves = {
            "train_loss": test.pop("train_loss_curve", []),
            "holdout_loss": test.pop("test_loss_curve", []),
        }
        result = RepeatResult(
            repeat=r,
            seed=seed,
            split_seed=split_spec.seed,
            best_h=best_h,
            best_val_fitness=_best_fitness(trace),
            test=test,
            trace=trace,
            curves=curves,
            mask_recall=mask_recall(ds, best_h),
        )
        logger.info(
            "[%s] 重复 %d/%d: 测试 ROC-AUC=%s, 评估 %d 次",
            method, r + 1, cfg.repeats, test.get("roc_auc"), result.n_evaluations,
        )
        repeats.append(result)

    return RunReport(method, cfg, ds.summary(), repeats, time.perf_counter() - started)


def run_tune(cfg: RunConfig) -> RunReport:
    """repeats × (optimizer.run + final_fit)"""
    return _run(cfg, "qibonn")


def run_baseline(cfg: RunConfig, kind: str) -> RunReport:
    """kind: 'vnn'（中点默认超参数、全部特征）或 'random_search'（与 QIBONN 相同预算）"""
    if kind not in ("vnn", "random_search"):
        raise ConfigError(f"未知的基线类型: {kind}")
    return _run(cfg, kind)


def _ensure(result: Dict[str, Any]) -> str:
    if not result["success"]:
        raise QibonnError(result["error"])
    return result["path"]


def dataset_slug(ref: str) -> str:
    """数据集引用 → 可用作目录名的短名"""
    if ref in BUNDLED:
        return ref
    if ref.startswith("synth:"):
        return re.sub(r"[:,]", "_", ref)
    return Path(ref).stem


def run_name(report: RunReport) -> str:
    cfg = report.config
    return f"{report.method}-{dataset_slug(cfg.dataset)}-{cfg.arch_kind}-s{cfg.seed}"


def write_run(
    report: RunReport, out_dir: Optional[Union[str, Path]] = None, plot: bool = False
) -> Path:
    """一个运行一个目录：config.json, report.json, trace.jsonl, curves.csv, metadata.json"""
    out = get_output_dir(out_dir or report.config.output_dir, run_name(report))
    _ensure(Exporter.export_json(report.config.to_dict(), out / "config.json"))
    _ensure(Exporter.export_json(report.to_dict(), out / "report.json"))
    trace_rows = (dict(rec.to_dict(), repeat=r.repeat) for r in report.repeats for rec in r.trace)
    _ensure(Exporter.export_jsonl(trace_rows, out / "trace.jsonl"))
    curves = report.curves_frame()
    _ensure(Exporter.export_csv(curves, out / "curves.csv"))
    _ensure(Exporter.export_json(
        {
            "created_at": datetime.now().isoformat(timespec="seconds"),
            "wall_clock_seconds": round(report.wall_clock, 3),
            "qibonn_version": __version__,
            **get_runtime_info(),
        },
        out / "metadata.json",
    ))
    if plot and not curves.empty:
        chart = ChartRenderer().render_loss_curves(curves, out / "loss_curves.png")
        if not chart["success"]:
            logger.warning("损失曲线绘制失败: %s", chart["error"])
    logger.info("结果已写入 %s", out)
    return out


@dataclass
class SweepReport:
    table: pd.DataFrame
    deltas: pd.DataFrame
    reports: List[RunReport]


def run_noise_sweep(cfg: RunConfig, grid: Optional[Sequence[NoiseSpec]] = None) -> SweepReport:
    """每个噪声条件（总含无噪声）执行一次 run_tune，输出长表与相对无噪声的差值"""
    grid = list(grid or DEFAULT_NOISE_GRID)
    if not any(s.kind is NoiseKind.NONE for s in grid):
        grid.insert(0, NoiseSpec())

    reports, rows = [], []
    for spec in grid:
        logger.info("噪声条件: %s", spec.label)
        report = run_tune(replace(cfg, optimizer=replace(cfg.optimizer, noise=spec)))
        reports.append(report)
        for r in report.repeats:
            rows.append({
                "condition": spec.label,
                "repeat": r.repeat,
                "roc_auc": r.test.get("roc_auc"),
                "pr_auc": r.test.get("pr_auc"),
            })

    table = pd.DataFrame(rows, columns=["condition", "repeat", "roc_auc", "pr_auc"])
    means = table.groupby("condition", sort=False)[["roc_auc", "pr_auc"]].mean()
    baseline = means.loc["noiseless"]
    deltas = pd.DataFrame({
        "condition": means.index,
        "roc_auc_mean": means["roc_auc"].to_numpy(),
        "pr_auc_mean": means["pr_auc"].to_numpy(),
        "roc_auc_delta": (means["roc_auc"] - baseline["roc_auc"]).to_numpy(),
        "pr_auc_delta": (means["pr_auc"] - baseline["pr_auc"]).to_numpy(),
    })
    return SweepReport(table, deltas, reports)


def write_sweep(
    sweep: SweepReport, out_dir: Optional[Union[str, Path]] = None, plot: bool = False
) -> Path:
    cfg = sweep.reports[0].config
    name = f"noise-sweep-{dataset_slug(cfg.dataset)}-{cfg.arch_kind}-s{cfg.seed}"
    out = get_output_dir(out_dir or cfg.output_dir, name)
    for report in sweep.reports:
        write_run(report, out / report.config.optimizer.noise.label.replace(":", "_"))
    _ensure(Exporter.export_csv(sweep.table, out / "sweep.csv"))
    _ensure(Exporter.export_csv(sweep.deltas, out / "deltas.csv"))
    if plot:
        chart = ChartRenderer().render_noise_sweep(sweep.table, out / "noise_sweep.png")
        if not chart["success"]:
            logger.warning("噪声扫描图绘制失败: %s", chart["error"])
    logger.info("噪声扫描结果已写入 %s", out)
    return out


def _read_report(run_dir: Path) -> Optional[Dict[str, Any]]:
    try:
        with open(run_dir / "report.json", "r", encoding="utf-8") as f:
            report = json.load(f)
        for key in ("method", "dataset", "arch_kind", "summary", "repeats"):
            if key not in report:
                raise KeyError(key)
        if not (run_dir / "trace.jsonl").exists():
            raise FileNotFoundError("trace.jsonl")
        return report
    except (OSError, ValueError, KeyError) as e:
        logger.warning("跳过无法读取的运行目录 %s: %s", run_dir, e)
        return None


@dataclass
class ReportSummary:
    table: pd.DataFrame
    curves: Dict[str, pd.DataFrame]
    skipped: List[str]


def build_report(run_dirs: Sequence[Union[str, Path]]) -> ReportSummary:
    """合并多个运行目录：方法 × 数据集 × 结构 × 指标的汇总表，以及每个运行的损失曲线"""
    rows, curves, skipped = [], {}, []
    for run_dir in map(Path, run_dirs):
        report = _read_report(run_dir)
        if report is None:
            skipped.append(str(run_dir))
            continue
        summary = report["summary"]
        rows.append({
            "run": run_dir.name,
            "method": report["method"],
            "dataset": report["dataset"]["name"],
            "size_class": report["dataset"].get("size_class"),
            "arch_kind": report["arch_kind"],
            "repeats": len(report["repeats"]),
            "n_evaluations": report.get("n_evaluations", 0),
            "roc_auc_mean": summary["roc_auc"]["mean"],
            "roc_auc_std": summary["roc_auc"]["std"],
            "pr_auc_mean": summary["pr_auc"]["mean"],
            "pr_auc_std": summary["pr_auc"]["std"],
        })
        curve_rows = [
            [r["repeat"], epoch, *losses]
            for r in report["repeats"]
            for epoch, losses in enumerate(
                zip(r["curves"]["train_loss"], r["curves"]["holdout_loss"]), start=1
            )
        ]
        curves[run_dir.name] = pd.DataFrame(curve_rows, columns=CURVE_COLUMNS)

    columns = [
        "run", "method", "dataset", "size_class", "arch_kind", "repeats", "n_evaluations",
        "roc_auc_mean", "roc_auc_std", "pr_auc_mean", "pr_auc_std", "budget_parity",
    ]
    table = pd.DataFrame(rows, columns=columns[:-1])
    # 同一数据集与结构下，所有调参方法的评估次数必须相同
    tuned = table[table["method"] != "vnn"]
    parity = tuned.groupby(["dataset", "arch_kind"])["n_evaluations"].nunique().le(1)
    table["budget_parity"] = [
        bool(parity.get((d, a), True)) if m != "vnn" else None
        for m, d, a in zip(table["method"], table["dataset"], table["arch_kind"])
    ]
    return ReportSummary(table[columns], curves, skipped)


def write_report(summary: ReportSummary, out_dir: Union[str, Path], plot: bool = False) -> Path:
    out = get_output_dir(out_dir)
    _ensure(Exporter.export_csv(summary.table, out / "summary.csv"))
    text = "# 结果汇总\n\n" + markdown_table(summary.table)
    if summary.skipped:
        text += "\n跳过的运行目录: " + ", ".join(summary.skipped) + "\n"
    _ensure(Exporter.export_markdown(text, out / "summary.md"))
    renderer = ChartRenderer() if plot else None
    for name, curves in summary.curves.items():
        _ensure(Exporter.export_csv(curves, out / f"{name}_curves.csv"))
        if renderer is not None and not curves.empty:
            chart = renderer.render_loss_curves(curves, out / f"{name}_curves.png")
            if not chart["success"]:
                logger.warning("损失曲线绘制失败: %s", chart["error"])
    logger.info("汇总报告已写入 %s", out)
    return out
