"""运行配置：RunConfig、JSON 读写、点路径覆盖与环境变量"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

from dotenv import load_dotenv

from .datasets import SplitSpec
from .encoding import ARCH_DIMS, SpaceSpec, default_space
from .errors import ConfigError
from .optimizer import OptimizerConfig
from .qsim import NoiseSpec

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "QIBONN_LOG_LEVEL"

# CLI 短名 → 结构名
ARCH_ALIASES = {
    "shallow": "shallow",
    "deep": "deep_mlp",
    "deep_mlp": "deep_mlp",
    "res": "res_mlp",
    "res_mlp": "res_mlp",
}

# 种子与并发度由 RunConfig 顶层统一管理
_OPTIMIZER_KEYS = tuple(f.name for f in fields(OptimizerConfig) if f.name not in ("seed", "n_jobs"))
_SPLIT_KEYS = tuple(f.name for f in fields(SplitSpec))


def load_environment(dotenv_path: Optional[Union[str, Path]] = None) -> None:
    """加载 .env（不覆盖已有环境变量）"""
    load_dotenv(dotenv_path, override=False)


def default_log_level() -> str:
    return os.environ.get(LOG_LEVEL_ENV, "INFO").upper()


def _optimizer_from_dict(data: Mapping[str, Any]) -> OptimizerConfig:
    unknown = set(data) - set(_OPTIMIZER_KEYS)
    if unknown:
        raise ConfigError(f"optimizer 中的未知配置项: {sorted(unknown)}（seed/n_jobs 请写在顶层）")
    values = dict(data)
    if isinstance(values.get("noise"), str):
        values["noise"] = NoiseSpec.parse(values["noise"])
    try:
        return OptimizerConfig(**values)
    except TypeError as e:
        raise ConfigError(f"optimizer 配置无效: {e}") from e


def _split_from_dict(data: Mapping[str, Any]) -> SplitSpec:
    unknown = set(data) - set(_SPLIT_KEYS)
    if unknown:
        raise ConfigError(f"split 中的未知配置项: {sorted(unknown)}")
    return SplitSpec(**data)


@dataclass(frozen=True)
class RunConfig:
    """一次实验的完整配置

    dataset 可以是内置数据集名、'synth:...' 引用或 CSV/Excel 路径；
    第 r 次重复使用 seed + r 作为优化器与网络种子、split.seed + r 作为划分种子。
    """

    dataset: str = "synthetic"
    label_column: Optional[str] = None
    categorical_columns: List[str] = field(default_factory=list)
    drop_columns: List[str] = field(default_factory=list)
    positive_label: Optional[Any] = None
    arch_kind: str = "shallow"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    inner_epochs: int = 5
    final_epochs: int = 10
    repeats: int = 1
    seed: int = 0
    n_jobs: int = 1
    space_bpp: Dict[str, int] = field(default_factory=dict)
    space: Optional[SpaceSpec] = None
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.arch_kind not in ARCH_ALIASES:
            raise ConfigError(f"未知的网络结构: {self.arch_kind}（可用: {sorted(ARCH_ALIASES)}）")
        object.__setattr__(self, "arch_kind", ARCH_ALIASES[self.arch_kind])
        if self.inner_epochs < 1:
            raise ConfigError(f"inner_epochs 必须 ≥ 1: {self.inner_epochs}")
        if self.final_epochs < 0:
            raise ConfigError(f"final_epochs 不能为负: {self.final_epochs}")
        if self.repeats < 1:
            raise ConfigError(f"repeats 必须 ≥ 1: {self.repeats}")
        if self.n_jobs < 1:
            raise ConfigError(f"n_jobs 必须 ≥ 1: {self.n_jobs}")
        unknown = set(self.space_bpp) - set(ARCH_DIMS)
        if unknown:
            raise ConfigError(f"space_bpp 中的未知维度: {sorted(unknown)}")
        if any(int(v) < 1 for v in self.space_bpp.values()):
            raise ConfigError("space_bpp 的比特数必须 ≥ 1")
        if self.space is not None:
            if self.space_bpp:
                raise ConfigError("space 与 space_bpp 不能同时指定")
            missing = set(ARCH_DIMS) - {d.name for d in self.space.dims[self.space.n_feat :]}
            if missing:
                raise ConfigError(f"自定义搜索空间缺少结构维度: {sorted(missing)}")

    def optimizer_for(self, repeat: int) -> OptimizerConfig:
        return replace(self.optimizer, seed=self.seed + repeat, n_jobs=self.n_jobs)

    def split_for(self, repeat: int) -> SplitSpec:
        return replace(self.split, seed=self.split.seed + repeat)

    def space_for(self, n_feat: int) -> SpaceSpec:
        """自定义搜索空间优先，否则按 space_bpp 构造默认空间"""
        if self.space is None:
            return default_space(n_feat, self.space_bpp)
        if self.space.n_feat != n_feat:
            raise ConfigError(
                f"搜索空间的掩码位数 {self.space.n_feat} 与数据集特征数 {n_feat} 不符"
            )
        return self.space

    def to_dict(self) -> Dict[str, Any]:
        """全部字段（含默认值）写出，归档的配置可独立复现"""
        optimizer = self.optimizer.to_dict()
        return {
            "dataset": self.dataset,
            "label_column": self.label_column,
            "categorical_columns": list(self.categorical_columns),
            "drop_columns": list(self.drop_columns),
            "positive_label": self.positive_label,
            "arch_kind": self.arch_kind,
            "optimizer": {key: optimizer[key] for key in _OPTIMIZER_KEYS},
            "split": self.split.to_dict(),
            "inner_epochs": self.inner_epochs,
            "final_epochs": self.final_epochs,
            "repeats": self.repeats,
            "seed": self.seed,
            "n_jobs": self.n_jobs,
            "space_bpp": dict(sorted(self.space_bpp.items())),
            "space": self.space.to_dict() if self.space is not None else None,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("配置文件顶层必须是 JSON 对象")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"未知的配置项: {sorted(unknown)}")

        values = dict(data)
        if "optimizer" in values:
            values["optimizer"] = _optimizer_from_dict(values["optimizer"] or {})
        if "split" in values:
            values["split"] = _split_from_dict(values["split"] or {})
        for key in ("categorical_columns", "drop_columns"):
            if key in values:
                values[key] = list(values[key] or [])
        if "space_bpp" in values:
            values["space_bpp"] = {str(k): int(v) for k, v in (values["space_bpp"] or {}).items()}
        if values.get("space") is not None:
            try:
                values["space"] = SpaceSpec.from_dict(values["space"])
            except (KeyError, TypeError) as e:
                raise ConfigError(f"搜索空间定义无效: {e}") from e
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"配置无效: {e}") from e


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: Mapping[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    应用 key=value 形式的点路径覆盖（值优先按 JSON 解析，失败则视为字符串）

    例如 'optimizer.pop_size=6'、'optimizer.noise.kind=bit_flip'、'split.stratified=false'
    """
    result = json.loads(json.dumps(dict(data)))
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"覆盖项格式应为 key=value: {item}")
        parts = key.split(".")
        node = result
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            elif not isinstance(child, dict):
                raise ConfigError(f"无法在非对象配置项上设置子键: {key}")
            node = child
        node[parts[-1]] = _parse_value(raw.strip())
    return result


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件不是合法的 JSON ({path}): {e}") from e


def build_run_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Sequence[str] = (),
) -> RunConfig:
    """配置文件（可选）+ 覆盖项 → RunConfig"""
    data = read_config_file(config_path) if config_path else {}
    data = apply_overrides(data, overrides)
    cfg = RunConfig.from_dict(data)
    logger.debug("运行配置: %s", cfg.to_dict())
    return cfg
