"""与阈值无关的分类指标：ROC-AUC、PR-AUC（平均精度）与多分类宏平均 OvR"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np
from scipy.stats import rankdata

from .errors import StructuralError, UndefinedMetricError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredLabels:
    """打分与标签

    Args:
        scores: 二分类为 (n,) 正类分数；多分类为 (n, k) 每类分数
        labels: (n,) 整数标签
        k: 类别数
    """

    scores: np.ndarray
    labels: np.ndarray
    k: int = 2

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        labels = np.asarray(self.labels).astype(int)
        if len(scores) != len(labels):
            raise StructuralError(f"分数与标签长度不一致: {len(scores)} vs {len(labels)}")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)


def roc_auc(sl: ScoredLabels) -> float:
    """Mann–Whitney 形式的 ROC-AUC：随机正例得分高于随机负例的概率，平局记 ½"""
    y = sl.labels == 1
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC 需要同时存在正例和负例")
    ranks = rankdata(sl.scores, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_auc(sl: ScoredLabels) -> float:
    """平均精度：按分数降序（稳定排序）累加每个正例处的精度 × 召回增量"""
    y = (sl.labels == 1).astype(float)
    n_pos = y.sum()
    if n_pos == 0:
        raise UndefinedMetricError("PR-AUC 需要至少一个正例")
    order = np.argsort(-sl.scores, kind="stable")
    hits = y[order]
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float((precision * hits).sum() / n_pos)


_BINARY = {"roc_auc": roc_auc, "pr_auc": pr_auc}


def macro_ovr(sl: ScoredLabels, metric: str = "roc_auc") -> float:
    """一对其余宏平均：各类二分类指标的无权均值；缺席的类别跳过并告警"""
    if metric not in _BINARY:
        raise ValueError(f"不支持的指标: {metric}")
    scores = np.asarray(sl.scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] != sl.k:
        raise StructuralError(f"多分类分数需要形状 (n, {sl.k})，实际为 {scores.shape}")

    values = []
    for c in range(sl.k):
        binary = ScoredLabels(scores[:, c], (sl.labels == c).astype(int))
        try:
            values.append(_BINARY[metric](binary))
        except UndefinedMetricError:
            logger.warning("类别 %d 在标签中缺席或独占，宏平均中跳过", c)
    if not values:
        raise UndefinedMetricError("所有类别都无法计算指标")
    return float(np.mean(values))


def evaluate_scores(sl: ScoredLabels) -> Dict[str, Any]:
    """计算 ROC-AUC 与 PR-AUC；无定义时 ROC 取机会水平 0.5 并打上告警标记"""
    out: Dict[str, Any] = {}
    undefined = []
    for name, fn in _BINARY.items():
        try:
            out[name] = macro_ovr(sl, name) if sl.k > 2 else fn(sl)
        except UndefinedMetricError:
            undefined.append(name)
            out[name] = 0.5 if name == "roc_auc" else None
    if undefined:
        logger.warning("指标无定义，按机会水平处理: %s", ", ".join(undefined))
        out["metric_warning"] = ",".join(undefined)
    return out
