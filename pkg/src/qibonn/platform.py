"""平台适配模块：输出目录、运行环境信息、图表字体"""

import os
import platform
import sys
from pathlib import Path
from typing import Dict, Optional, Union

# 默认输出根目录的环境变量
OUTPUT_ROOT_ENV = "QIBONN_OUTPUT_ROOT"
# 内置表格数据集目录的环境变量
DATASET_DIR_ENV = "QIBONN_DATASET_DIR"


def get_platform() -> str:
    """获取当前平台名称"""
    system = platform.system()
    if system == "Darwin":
        return "macOS"
    elif system == "Windows":
        return "Windows"
    elif system == "Linux":
        return "Linux"
    return "Unknown"


def get_runtime_info() -> Dict[str, str]:
    """运行环境信息（写入 metadata.json，不进入可复现产物）"""
    return {
        "platform": get_platform(),
        "python": sys.version.split()[0],
        "machine": platform.machine(),
    }


def get_chart_font() -> list:
    """
    获取图表默认字体列表（确保中文支持）
    返回字体列表，按优先级排序
    """
    system = platform.system()

    if system == "Windows":
        return ['Microsoft YaHei', 'SimHei', 'SimSun', 'DejaVu Sans']
    elif system == "Darwin":
        return ['PingFang SC', 'Arial Unicode MS', 'STHeiti', 'DejaVu Sans']
    else:
        return ['WenQuanYi Micro Hei', 'WenQuanYi Zen Hei', 'Noto Sans CJK SC', 'DejaVu Sans']


def get_output_root() -> Path:
    """默认输出根目录：环境变量 QIBONN_OUTPUT_ROOT，否则为当前目录下的 outputs"""
    return Path(os.environ.get(OUTPUT_ROOT_ENV) or "outputs")


def get_output_dir(path: Optional[Union[str, Path]] = None, name: Optional[str] = None) -> Path:
    """获取（并创建）一次运行的输出目录

    Args:
        path: 显式指定的目录；为空时使用 get_output_root() / name
        name: 运行名
    """
    if path:
        output_dir = Path(path)
    else:
        output_dir = get_output_root() / (name or "run")
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir


def get_dataset_dir() -> Path:
    """内置 CSV 数据集目录：环境变量 QIBONN_DATASET_DIR，否则为仓库的 assets/datasets"""
    default = Path(__file__).resolve().parents[2] / "assets" / "datasets"
    return Path(os.environ.get(DATASET_DIR_ENV) or default)
