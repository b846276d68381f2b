"""数据体检模块：列类型推断、缺失值与常量列检测"""

import pandas as pd
import numpy as np
from pandas.api.types import is_numeric_dtype, is_datetime64_any_dtype
from typing import Dict, List, Any, Optional, Sequence
import warnings


def profile_columns(
    df: pd.DataFrame,
    categorical_columns: Optional[Sequence[str]] = None,
    sample_size: int = 5000,
) -> Dict[str, Any]:
    """
    对特征列进行体检，决定每列的处理方式

    Args:
        df: 特征 DataFrame（不含标签列）
        categorical_columns: 强制按分类处理的列
        sample_size: 采样行数（用于类型推断）

    Returns:
        {'rows', 'cols', 'schema': [...], 'warnings': [...]}
        schema 中每列包含 name, dtype, n_missing, missing_pct, n_unique, constant
    """
    forced = set(categorical_columns or [])
    missing_forced = forced - set(df.columns)
    warnings_list = []
    if missing_forced:
        warnings_list.append(f"指定的分类列不存在，已忽略: {sorted(missing_forced)}")

    if df.empty:
        return {
            "rows": 0,
            "cols": len(df.columns),
            "schema": [],
            "warnings": warnings_list + ["数据框为空"],
        }

    sample_df = df.head(sample_size) if len(df) > sample_size else df
    schema = []

    # 检查重复列名
    if len(df.columns) != len(set(df.columns)):
        warnings_list.append("存在重复的列名")

    for col in df.columns:
        s = df[col]
        n_missing = int(s.isna().sum())

        # 检测空列
        if s.isna().all():
            warnings_list.append(f"列 '{col}' 完全为空，已丢弃")
            schema.append({
                "name": col,
                "dtype": "empty",
                "n_missing": n_missing,
                "missing_pct": 100.0,
                "n_unique": 0,
                "constant": True,
            })
            continue

        dtype = "categorical" if col in forced else infer_dtype(s, sample_df[col])
        n_unique = int(s.nunique(dropna=True))

        col_info = {
            "name": col,
            "dtype": dtype,
            "n_missing": n_missing,
            "missing_pct": round(n_missing / len(s) * 100, 2),
            "n_unique": n_unique,
            "constant": n_unique <= 1,
        }

        if dtype == "datetime":
            warnings_list.append(f"列 '{col}' 是时间类型，已丢弃")
        elif dtype == "categorical" and n_unique > 100:
            warnings_list.append(f"列 '{col}' 唯一值过多 ({n_unique})，独热编码后维度较高")
        if n_missing > 0 and dtype in ("numeric", "categorical"):
            fill = "中位数填补" if dtype == "numeric" else "独热编码中记为全 0"
            warnings_list.append(f"列 '{col}' 有 {n_missing} 个缺失值，{fill}")

        schema.append(col_info)

    return {
        "rows": len(df),
        "cols": len(df.columns),
        "schema": schema,
        "warnings": warnings_list,
    }


def infer_dtype(series: pd.Series, sample_series: Optional[pd.Series] = None) -> str:
    """
    推断列的数据类型

    Returns:
        'numeric', 'datetime', 'categorical', 'empty'
    """
    if sample_series is None:
        sample_series = series

    # 检查是否为空
    if series.isna().all():
        return "empty"

    if is_datetime64_any_dtype(series):
        return "datetime"

    # 检查是否为数值类型
    if is_numeric_dtype(series):
        return "numeric"

    non_null = sample_series.dropna()

    # 尝试转换为数值类型
    numeric_series = pd.to_numeric(non_null, errors="coerce")
    # 80% 以上可以转换为数值
    if len(non_null) > 0 and numeric_series.notna().sum() / len(non_null) > 0.8:
        return "numeric"

    # 看起来像时间的字符串
    test_values = non_null.head(10).astype(str)
    if any(any(char in v for char in ["-", "/", ":", "T"]) for v in test_values):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            try:
                pd.to_datetime(non_null.head(5), errors="raise")
                return "datetime"
            except (ValueError, TypeError, pd.errors.ParserError):
                pass

    # 默认为分类类型
    return "categorical"


def convert_to_python_type(value: Any) -> Any:
    """将 numpy/pandas 类型转换为 Python 原生类型（用于 JSON 输出）"""
    if isinstance(value, (np.integer, np.floating)):
        return float(value) if isinstance(value, np.floating) else int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, pd.Timestamp):
        return str(value)
    return value


def columns_by_dtype(profile: Dict[str, Any]) -> Dict[str, List[str]]:
    """按推断类型分组列名"""
    groups: Dict[str, List[str]] = {"numeric": [], "categorical": [], "datetime": [], "empty": []}
    for col in profile["schema"]:
        groups[col["dtype"]].append(col["name"])
    return groups
