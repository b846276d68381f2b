"""图表渲染模块：噪声扫描柱状图与训练/留出损失曲线"""

import matplotlib
matplotlib.use('Agg')  # 使用非交互式后端
import matplotlib.pyplot as plt
import pandas as pd
import numpy as np
import traceback
from pathlib import Path
from typing import Any, Dict, Union

from .platform import get_chart_font


class ChartRenderer:
    """图表渲染器：输入结果表格，输出 PNG 文件"""

    def __init__(self, dpi: int = 150):
        self.dpi = dpi
        # 设置 matplotlib 默认参数（支持中文）
        plt.rcParams['font.sans-serif'] = get_chart_font()
        plt.rcParams['axes.unicode_minus'] = False

    def _save(self, fig, output_path: Union[str, Path]) -> Dict[str, Any]:
        output_path = Path(output_path)
        try:
            output_path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(output_path, format="png", bbox_inches='tight', dpi=self.dpi)
            if not output_path.exists():
                raise RuntimeError("图片文件未成功生成")
            return {"success": True, "output_path": str(output_path), "error": None}
        except Exception as e:
            return {
                "success": False,
                "output_path": None,
                "error": f"{type(e).__name__}: {str(e)}",
                "error_traceback": traceback.format_exc(),
            }
        finally:
            plt.close(fig)

    def render_noise_sweep(
        self, sweep: pd.DataFrame, output_path: Union[str, Path]
    ) -> Dict[str, Any]:
        """
        各噪声条件下 ROC-AUC / PR-AUC 均值的分组柱状图（误差棒为重复间标准差）

        Args:
            sweep: 长表，列 condition, repeat, roc_auc, pr_auc
            output_path: 输出 PNG 路径
        """
        stats = sweep.groupby("condition", sort=False)[["roc_auc", "pr_auc"]].agg(["mean", "std"])
        conditions = list(stats.index)
        x = np.arange(len(conditions))
        width = 0.38

        fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(conditions)), 4.5))
        bars = ((-width / 2, "roc_auc", "ROC-AUC"), (width / 2, "pr_auc", "PR-AUC"))
        for offset, metric, label in bars:
            ax.bar(
                x + offset,
                stats[(metric, "mean")].to_numpy(),
                width,
                yerr=stats[(metric, "std")].fillna(0.0).to_numpy(),
                capsize=3,
                label=label,
            )
        ax.set_xticks(x)
        ax.set_xticklabels(conditions, rotation=30, ha="right")
        ax.set_ylim(0.0, 1.0)
        ax.set_ylabel("测试集指标")
        ax.set_title("噪声条件对调参结果的影响")
        ax.legend()
        ax.grid(axis="y", alpha=0.3)
        return self._save(fig, output_path)

    def render_loss_curves(
        self, curves: pd.DataFrame, output_path: Union[str, Path]
    ) -> Dict[str, Any]:
        """
        最终模型每个 epoch 的训练/留出损失，每个重复一条线

        Args:
            curves: 列 repeat, epoch, train_loss, holdout_loss
            output_path: 输出 PNG 路径
        """
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for repeat, group in curves.groupby("repeat"):
            line, = ax.plot(group["epoch"], group["train_loss"], label=f"训练 (重复 {repeat})")
            ax.plot(
                group["epoch"],
                group["holdout_loss"],
                linestyle="--",
                color=line.get_color(),
                label=f"留出 (重复 {repeat})",
            )
        ax.set_xlabel("epoch")
        ax.set_ylabel("交叉熵损失")
        ax.set_title("最终模型损失曲线")
        ax.legend(fontsize="small")
        ax.grid(alpha=0.3)
        return self._save(fig, output_path)
