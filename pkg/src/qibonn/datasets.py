"""数据集类型与准备：标准化、分层划分、特征掩码与合成数据生成"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.datasets import make_classification
from sklearn.model_selection import train_test_split

from .errors import ConfigError, DataError, DomainError, SplitError, StructuralError

logger = logging.getLogger(__name__)


class Dataset:
    """不可变的表格数据集

    Args:
        features: (s, d) 实数矩阵
        labels: (s,) 整数标签，取值 0..k-1
        k: 类别数
        feature_names: 列名
        standardization: 每列 (mean, std)，未标准化时为 None
        class_names: 标签编码前的原始类别名
        informative: 已知有效特征的列下标（合成数据）
        name: 数据集名
        warnings: 加载过程中累计的告警
    """

    def __init__(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        k: int,
        feature_names: Sequence[str],
        standardization: Optional[Tuple[np.ndarray, np.ndarray]] = None,
        class_names: Optional[Sequence[Any]] = None,
        informative: Optional[Sequence[int]] = None,
        name: str = "",
        warnings: Optional[List[str]] = None,
    ):
        features = np.array(features, dtype=float)
        labels = np.asarray(labels).astype(np.int64)
        if features.ndim != 2 or len(features) != len(labels):
            raise StructuralError(f"特征矩阵形状 {features.shape} 与标签长度 {len(labels)} 不符")
        if features.shape[1] != len(feature_names):
            raise StructuralError("列名数量与特征列数不符")
        if np.isnan(features).any():
            raise DataError("特征矩阵中仍有缺失值")
        if len(labels) and (labels.min() < 0 or labels.max() >= k):
            raise DataError(f"标签必须在 0..{k - 1} 内")

        features.setflags(write=False)
        labels.setflags(write=False)
        self._features = features
        self.labels = labels
        self.k = int(k)
        self.feature_names = list(feature_names)
        self.standardization = standardization
        self.class_names = list(class_names) if class_names is not None else list(range(k))
        self.informative = list(informative) if informative is not None else None
        self.name = name
        self.warnings = list(warnings or [])
        # 读取计数：用于检查调参过程是否触碰测试集；并行评估时多个线程会同时读取
        self.reads = 0
        self._reads_lock = threading.Lock()

    @property
    def features(self) -> np.ndarray:
        with self._reads_lock:
            self.reads += 1
        return self._features

    @property
    def n_samples(self) -> int:
        return self._features.shape[0]

    @property
    def n_features(self) -> int:
        return self._features.shape[1]

    @property
    def size_class(self) -> str:
        """按样本数分组：small (≤1,000) / medium (≤10,000) / large"""
        if self.n_samples <= 1000:
            return "small"
        if self.n_samples <= 10000:
            return "medium"
        return "large"

    def _derive(self, features: np.ndarray, labels: np.ndarray, **changes) -> "Dataset":
        kwargs = dict(
            k=self.k,
            feature_names=self.feature_names,
            standardization=self.standardization,
            class_names=self.class_names,
            informative=self.informative,
            name=self.name,
            warnings=self.warnings,
        )
        kwargs.update(changes)
        return Dataset(features, labels, **kwargs)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return self._derive(self.features[indices], self.labels[indices])

    def concat(self, other: "Dataset") -> "Dataset":
        return self._derive(
            np.vstack([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
        )

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "samples": self.n_samples,
            "features": self.n_features,
            "classes": self.k,
            "size_class": self.size_class,
            "informative": self.informative,
            "warnings": self.warnings,
        }


@dataclass(frozen=True)
class SplitSpec:
    """训练/验证/测试划分比例"""

    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if min(fracs) <= 0:
            raise ConfigError(f"划分比例必须为正: {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"划分比例之和必须为 1: {fracs}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "train_frac": self.train_frac,
            "val_frac": self.val_frac,
            "test_frac": self.test_frac,
            "stratified": self.stratified,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TuningData:
    """调参可见的数据：只有训练集和验证集"""

    train: Dataset
    val: Dataset


@dataclass(frozen=True)
class DatasetSplit:
    train: Dataset
    val: Dataset
    test: Dataset
    indices: Dict[str, np.ndarray]

    @property
    def tuning(self) -> TuningData:
        return TuningData(self.train, self.val)


def standardize(features: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """按列 z-score 标准化（总体标准差）"""
    means = features.mean(axis=0)
    stds = features.std(axis=0)
    return (features - means) / stds, (means, stds)


def split(ds: Dataset, spec: SplitSpec) -> DatasetSplit:
    """互不相交、覆盖全集、可选分层、由种子确定的三路划分"""
    labels = ds.labels
    counts = np.bincount(labels, minlength=ds.k)
    if spec.stratified and counts.min() < 3:
        small = [int(c) for c in np.flatnonzero(counts < 3)]
        raise SplitError(f"类别 {small} 的样本数少于划分份数 3，无法分层划分")

    index = np.arange(ds.n_samples)
    try:
        rest, test = train_test_split(
            index,
            test_size=spec.test_frac,
            stratify=labels if spec.stratified else None,
            random_state=spec.seed,
        )
        train, val = train_test_split(
            rest,
            test_size=spec.val_frac / (spec.train_frac + spec.val_frac),
            stratify=labels[rest] if spec.stratified else None,
            random_state=spec.seed,
        )
    except ValueError as e:
        raise SplitError(f"数据集划分失败: {e}") from e

    indices = {"train": np.sort(train), "val": np.sort(val), "test": np.sort(test)}
    return DatasetSplit(
        ds.subset(indices["train"]),
        ds.subset(indices["val"]),
        ds.subset(indices["test"]),
        indices,
    )


def apply_mask(ds: Dataset, mask: Sequence[int]) -> Dataset:
    """按特征掩码选择列，列名、标准化参数与有效特征下标同步筛选"""
    mask = np.asarray(mask).astype(bool)
    if mask.shape != (ds.n_features,):
        raise StructuralError(f"掩码长度 {mask.size} 与特征数 {ds.n_features} 不符")
    if not mask.any():
        raise DomainError("特征掩码为空")

    columns = np.flatnonzero(mask)
    standardization = None
    if ds.standardization is not None:
        means, stds = ds.standardization
        standardization = (means[columns], stds[columns])
    informative = None
    if ds.informative is not None:
        remap = {int(c): i for i, c in enumerate(columns)}
        informative = [remap[c] for c in ds.informative if c in remap]
    return ds._derive(
        ds.features[:, columns],
        ds.labels,
        feature_names=[ds.feature_names[c] for c in columns],
        standardization=standardization,
        informative=informative,
    )


def synthesize(
    n: int,
    d_informative: int,
    d_noise: int,
    k: int = 2,
    seed: int = 0,
    class_sep: float = 2.0,
    flip_y: float = 0.0,
    weights: Optional[Sequence[float]] = None,
    name: str = "",
) -> Dataset:
    """合成数据：前 d_informative 列可线性区分类别，其余列为独立标准正态噪声

    Args:
        n: 样本数
        d_informative: 有效特征数
        d_noise: 噪声特征数
        k: 类别数
        seed: 随机种子
        class_sep: 类中心间距
        flip_y: 标签随机翻转比例
        weights: 类别比例（可选）
    """
    if min(n, d_informative, k) < 1 or d_noise < 0:
        raise ConfigError("合成数据的样本数、特征数与类别数必须为正")
    if k > 2 ** d_informative:
        raise ConfigError(f"{d_informative} 个有效特征无法区分 {k} 个类别")

    features, labels = make_classification(
        n_samples=n,
        n_features=d_informative + d_noise,
        n_informative=d_informative,
        n_redundant=0,
        n_repeated=0,
        n_classes=k,
        n_clusters_per_class=1,
        class_sep=class_sep,
        flip_y=flip_y,
        weights=list(weights) if weights is not None else None,
        shuffle=False,
        random_state=seed,
    )
    features, stats = standardize(features)
    names = [f"informative_{i}" for i in range(d_informative)]
    names += [f"noise_{i}" for i in range(d_noise)]
    return Dataset(
        features,
        labels,
        k,
        names,
        standardization=stats,
        informative=list(range(d_informative)),
        name=name or f"synth-{n}x{d_informative + d_noise}-k{k}-s{seed}",
    )


# 随包提供的合成数据集：按名称确定性生成，带有效特征元数据
SYNTHETIC_BUNDLED: Dict[str, Dict[str, Any]] = {
    "synthetic": dict(n=600, d_informative=5, d_noise=15, k=2, seed=0, class_sep=1.0, flip_y=0.02),
    "synthetic-multiclass": dict(n=600, d_informative=4, d_noise=8, k=3, seed=0, class_sep=1.5),
}

_SYNTH_KEYS = {
    "n": ("n", int),
    "informative": ("d_informative", int),
    "noise": ("d_noise", int),
    "k": ("k", int),
    "seed": ("seed", int),
    "sep": ("class_sep", float),
    "flip": ("flip_y", float),
}


def parse_synth_ref(ref: str) -> Dict[str, Any]:
    """解析 'synth:n=600,informative=5,noise=15,k=2,seed=0' 形式的引用"""
    params: Dict[str, Any] = dict(n=600, d_informative=5, d_noise=15, k=2, seed=0)
    body = ref.split(":", 1)[1] if ":" in ref else ""
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, _, value = item.partition("=")
        if key not in _SYNTH_KEYS:
            raise ConfigError(f"未知的合成数据参数: {key}（可用: {sorted(_SYNTH_KEYS)}）")
        target, cast = _SYNTH_KEYS[key]
        try:
            params[target] = cast(value)
        except ValueError as e:
            raise ConfigError(f"合成数据参数 {key} 的值无效: {value}") from e
    return params

