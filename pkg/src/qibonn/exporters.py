"""导出模块：JSON / JSONL / CSV / Markdown 结果文件"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Union

import numpy as np
import pandas as pd

from .profiling import convert_to_python_type


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    converted = convert_to_python_type(value)
    if converted is value:
        raise TypeError(f"无法序列化的类型: {type(value).__name__}")
    return converted


def dumps(data: Any, indent: Union[int, None] = 2) -> str:
    """确定性的 JSON 文本：键排序、非 ASCII 原样保留"""
    return json.dumps(
        data, indent=indent, sort_keys=True, ensure_ascii=False, default=_json_default
    )


def _prepare(target_path: Union[str, Path]) -> Path:
    target = Path(target_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


class Exporter:
    """导出器：所有方法返回 {'success': bool, 'path': str, 'error': Optional[str]}"""

    @staticmethod
    def export_json(data: Mapping[str, Any], target_path: Union[str, Path]) -> Dict[str, Any]:
        """
        导出 JSON 文档（config.json / report.json / metadata.json）

        Args:
            data: 可 JSON 序列化的字典
            target_path: 目标路径
        """
        try:
            target = _prepare(target_path)
            with open(target, "w", encoding="utf-8") as f:
                f.write(dumps(data))
                f.write("\n")
            return {"success": True, "path": str(target), "error": None}
        except Exception as e:
            return {"success": False, "path": None, "error": f"导出 JSON 失败: {str(e)}"}

    @staticmethod
    def export_jsonl(
        records: Iterable[Mapping[str, Any]], target_path: Union[str, Path]
    ) -> Dict[str, Any]:
        """导出 JSONL：每行一个紧凑 JSON 对象（评估轨迹）"""
        try:
            target = _prepare(target_path)
            with open(target, "w", encoding="utf-8") as f:
                for record in records:
                    line = json.dumps(
                        record,
                        sort_keys=True,
                        ensure_ascii=False,
                        separators=(",", ":"),
                        default=_json_default,
                    )
                    f.write(line)
                    f.write("\n")
            return {"success": True, "path": str(target), "error": None}
        except Exception as e:
            return {"success": False, "path": None, "error": f"导出 JSONL 失败: {str(e)}"}

    @staticmethod
    def export_csv(df: pd.DataFrame, target_path: Union[str, Path]) -> Dict[str, Any]:
        """导出 CSV（不含索引列）"""
        try:
            target = _prepare(target_path)
            df.to_csv(target, index=False, encoding="utf-8", lineterminator="\n")
            return {"success": True, "path": str(target), "error": None}
        except Exception as e:
            return {"success": False, "path": None, "error": f"导出 CSV 失败: {str(e)}"}

    @staticmethod
    def export_markdown(text: str, target_path: Union[str, Path]) -> Dict[str, Any]:
        try:
            target = _prepare(target_path)
            with open(target, "w", encoding="utf-8") as f:
                f.write(text)
            return {"success": True, "path": str(target), "error": None}
        except Exception as e:
            return {"success": False, "path": None, "error": f"导出 Markdown 失败: {str(e)}"}


def markdown_table(df: pd.DataFrame, float_format: str = "{:.4f}") -> str:
    """把 DataFrame 渲染成 Markdown 表格"""
    def cell(value: Any) -> str:
        if value is None or (isinstance(value, float) and np.isnan(value)):
            return "-"
        if isinstance(value, (float, np.floating)):
            return float_format.format(value)
        return str(value)

    header = "| " + " | ".join(str(c) for c in df.columns) + " |"
    divider = "|" + "|".join(" --- " for _ in df.columns) + "|"
    rows = ["| " + " | ".join(cell(v) for v in row) + " |" for row in df.itertuples(index=False)]
    return "\n".join([header, divider] + rows) + "\n"
