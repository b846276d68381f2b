"""数据加载工具：CSV/Excel 读取、标签编码、缺失值填补、独热编码与标准化"""

import logging
import pandas as pd
import numpy as np
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from .datasets import SYNTHETIC_BUNDLED, Dataset, standardize, synthesize
from .errors import ConfigError, DataError
from .platform import get_dataset_dir
from .profiling import columns_by_dtype, convert_to_python_type, profile_columns

logger = logging.getLogger(__name__)


def load_data_file(file_path: Union[str, Path]) -> pd.DataFrame:
    """
    加载数据文件（CSV 或 Excel）

    Args:
        file_path: 文件路径

    Returns:
        DataFrame
    """
    file_path = Path(file_path)

    if not file_path.exists():
        raise DataError(f"文件不存在: {file_path}")

    try:
        if file_path.suffix.lower() in ['.xlsx', '.xls']:
            df = pd.read_excel(file_path)
        else:
            df = pd.read_csv(file_path, encoding='utf-8')
    except Exception as e:
        raise DataError(f"加载文件失败 ({file_path}): {str(e)}") from e

    if df.empty:
        raise DataError(f"文件中没有数据行: {file_path}")
    return df


def _encode_labels(values: pd.Series, positive_label: Optional[Any]) -> tuple:
    """标签编码为 0..K-1：按取值排序，二分类时字典序较大的值为正类，可用 positive_label 覆盖"""
    if pd.api.types.is_numeric_dtype(values):
        classes = sorted(values.unique().tolist())
    else:
        values = values.astype(str)
        classes = sorted(values.unique().tolist())

    if positive_label is not None and len(classes) == 2:
        match = [c for c in classes if str(c) == str(positive_label)]
        if not match:
            raise DataError(f"指定的正类 '{positive_label}' 不在标签取值 {classes} 中")
        classes = [c for c in classes if c != match[0]] + match

    lookup = {c: i for i, c in enumerate(classes)}
    labels = values.map(lookup).to_numpy(dtype=np.int64)
    return labels, [convert_to_python_type(c) for c in classes]


def load_csv(
    path: Union[str, Path],
    label_column: str,
    categorical_columns: Optional[Sequence[str]] = None,
    positive_label: Optional[Any] = None,
    drop_columns: Optional[Sequence[str]] = None,
    name: Optional[str] = None,
) -> Dataset:
    """
    读取表格文件并完成全部预处理

    Args:
        path: CSV/Excel 路径（首行为表头）
        label_column: 标签列名
        categorical_columns: 强制按分类处理的特征列
        positive_label: 二分类时指定的正类取值
        drop_columns: 直接丢弃的列（如 ID）
        name: 数据集名，默认取文件名

    Returns:
        标准化后的 Dataset；告警累计在 Dataset.warnings 中
    """
    df = load_data_file(path)
    warnings_list: List[str] = []

    if label_column not in df.columns:
        raise DataError(f"找不到标签列 '{label_column}'，可用列: {list(df.columns)}")

    drop = [c for c in (drop_columns or []) if c in df.columns]
    if drop:
        df = df.drop(columns=drop)

    missing_label = df[label_column].isna()
    if missing_label.any():
        rows = (np.flatnonzero(missing_label.to_numpy()) + 2).tolist()[:10]
        warnings_list.append(
            f"丢弃 {int(missing_label.sum())} 行缺失标签的样本（文件行号示例: {rows}）"
        )
        df = df.loc[~missing_label].reset_index(drop=True)

    labels, class_names = _encode_labels(df[label_column], positive_label)
    if len(class_names) < 2:
        raise DataError(f"标签列 '{label_column}' 只有 {len(class_names)} 个类别，至少需要 2 个")

    features_df = df.drop(columns=[label_column])
    profile = profile_columns(features_df, categorical_columns)
    warnings_list.extend(profile["warnings"])
    groups = columns_by_dtype(profile)

    blocks = []
    if groups["numeric"]:
        numeric = features_df[groups["numeric"]].apply(pd.to_numeric, errors="coerce")
        blocks.append(numeric.fillna(numeric.median()))
    if groups["categorical"]:
        categorical = features_df[groups["categorical"]].astype("string")
        blocks.append(pd.get_dummies(categorical, dtype=float))
    if not blocks:
        raise DataError(f"文件 {path} 中没有可用的特征列")
    encoded = pd.concat(blocks, axis=1)

    stds = encoded.std(axis=0, ddof=0)
    constant = stds.index[~(stds > 0)].tolist()
    if constant:
        warnings_list.append(f"丢弃常量列: {constant}")
        encoded = encoded.drop(columns=constant)
    if encoded.shape[1] == 0:
        raise DataError(f"文件 {path} 中所有特征列均为常量")

    features, stats = standardize(encoded.to_numpy(dtype=float))
    for message in warnings_list:
        logger.warning(message)

    return Dataset(
        features,
        labels,
        len(class_names),
        [str(c) for c in encoded.columns],
        standardization=stats,
        class_names=class_names,
        name=name or Path(path).stem,
        warnings=warnings_list,
    )


# 随包提供的表格数据集：与用户文件走同一条 load_csv 预处理路径
FILE_BUNDLED: Dict[str, Dict[str, Any]] = {
    "pima-scale": dict(file="pima_scale.csv", label_column="outcome", positive_label=1),
    "cleveland-scale": dict(
        file="cleveland_scale.csv",
        label_column="diagnosis",
        positive_label="presence",
        categorical_columns=["chest_pain", "rest_ecg", "st_slope", "thal"],
    ),
}

BUNDLED = tuple(SYNTHETIC_BUNDLED) + tuple(FILE_BUNDLED)


def bundled(name: str) -> Dataset:
    """按名称加载内置数据集"""
    if name in SYNTHETIC_BUNDLED:
        return synthesize(**SYNTHETIC_BUNDLED[name], name=name)
    if name not in FILE_BUNDLED:
        raise ConfigError(f"未知的内置数据集: {name}（可用: {sorted(BUNDLED)}）")
    entry = dict(FILE_BUNDLED[name])
    path = get_dataset_dir() / entry.pop("file")
    return load_csv(path, name=name, **entry)
