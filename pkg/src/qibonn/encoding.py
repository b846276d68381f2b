"""超参数搜索空间：维度声明、比特布局与线性/对数解码"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DomainError, StructuralError

# 默认搜索空间的六个结构维度（顺序即比特布局顺序）
ARCH_DIMS = (
    "dropout",
    "hidden_width",
    "learning_rate",
    "batch_size",
    "weight_decay",
    "n_hidden_layers",
)

BATCH_SIZES = (32, 48, 64, 96, 128, 192, 256, 384)

_EPS = 1e-9


class DimensionKind(str, Enum):
    CONTINUOUS = "continuous"
    LOG_CONTINUOUS = "log_continuous"
    INTEGER_RANGE = "integer_range"
    CATEGORICAL_SET = "categorical_set"
    BINARY_FLAG = "binary_flag"


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + _EPS))


@dataclass(frozen=True)
class DimensionSpec:
    """单个搜索维度

    Args:
        name: 维度名
        kind: 维度类型
        lo, hi: 取值范围（区间类型）
        choices: 有序候选值（categorical_set）
        bpp: 该维度占用的比特数
    """

    name: str
    kind: DimensionKind
    lo: float = 0.0
    hi: float = 1.0
    choices: Optional[Tuple[Any, ...]] = None
    bpp: int = 1

    def __post_init__(self):
        try:
            kind = DimensionKind(self.kind)
        except ValueError as e:
            raise ConfigError(f"维度 '{self.name}' 的类型未知: {self.kind}") from e
        object.__setattr__(self, "kind", kind)
        if self.choices is not None:
            object.__setattr__(self, "choices", tuple(self.choices))

        if kind is DimensionKind.BINARY_FLAG:
            object.__setattr__(self, "bpp", 1)
        elif int(self.bpp) < 1:
            raise ConfigError(f"维度 '{self.name}' 的 bpp 必须为正整数: {self.bpp}")

        if kind is DimensionKind.CATEGORICAL_SET:
            if not self.choices:
                raise ConfigError(f"维度 '{self.name}' 的候选值不能为空")
        elif kind is not DimensionKind.BINARY_FLAG:
            if not self.lo < self.hi:
                raise ConfigError(f"维度 '{self.name}' 要求 lo < hi: [{self.lo}, {self.hi}]")
            if kind is DimensionKind.LOG_CONTINUOUS and self.lo <= 0:
                raise ConfigError(f"对数维度 '{self.name}' 要求 lo > 0: {self.lo}")

    @property
    def max_code(self) -> int:
        return (1 << self.bpp) - 1

    def decode_code(self, v: int) -> Any:
        """把无符号整数 v 映射到该维度的取值"""
        kind, vmax = self.kind, self.max_code
        if kind is DimensionKind.BINARY_FLAG:
            return int(v)
        if kind is DimensionKind.CATEGORICAL_SET:
            index = _round_half_up(v / vmax * (len(self.choices) - 1))
            return self.choices[index]
        # 端点直接返回，避免浮点漂移
        if v == 0:
            value = self.lo
        elif v == vmax:
            value = self.hi
        elif kind is DimensionKind.LOG_CONTINUOUS:
            log_lo, log_hi = math.log10(self.lo), math.log10(self.hi)
            value = 10.0 ** (log_lo + v / vmax * (log_hi - log_lo))
        else:
            value = self.lo + v / vmax * (self.hi - self.lo)
        if kind is DimensionKind.INTEGER_RANGE:
            return _round_half_up(value)
        return float(value)

    def _distance(self, decoded: Any, target: Any) -> float:
        if self.kind is DimensionKind.CATEGORICAL_SET:
            return abs(self.choices.index(decoded) - self.choices.index(target))
        if self.kind is DimensionKind.LOG_CONTINUOUS:
            return abs(math.log10(decoded) - math.log10(target))
        return abs(float(decoded) - float(target))

    def encode_value(self, x: Any) -> int:
        """最近码字：decode_code(encode_value(x)) 与 x 相差不超过一个量化步长"""
        kind, vmax = self.kind, self.max_code
        if kind is DimensionKind.BINARY_FLAG:
            if x not in (0, 1, True, False):
                raise DomainError(f"维度 '{self.name}' 只接受 0/1: {x}")
            return int(x)

        if kind is DimensionKind.CATEGORICAL_SET:
            if x not in self.choices:
                raise DomainError(f"维度 '{self.name}' 的取值不在候选集中: {x}")
            n = len(self.choices)
            guess = 0 if n == 1 else _round_half_up(self.choices.index(x) / (n - 1) * vmax)
        else:
            tol = 1e-12 * max(1.0, abs(self.hi))
            if not self.lo - tol <= float(x) <= self.hi + tol:
                raise DomainError(f"维度 '{self.name}' 的取值超出范围 [{self.lo}, {self.hi}]: {x}")
            if kind is DimensionKind.INTEGER_RANGE and float(x) != round(float(x)):
                raise DomainError(f"维度 '{self.name}' 需要整数: {x}")
            if kind is DimensionKind.LOG_CONTINUOUS:
                log_lo, log_hi = math.log10(self.lo), math.log10(self.hi)
                frac = (math.log10(float(x)) - log_lo) / (log_hi - log_lo)
            else:
                frac = (float(x) - self.lo) / (self.hi - self.lo)
            guess = _round_half_up(min(max(frac, 0.0), 1.0) * vmax)

        candidates = range(max(0, guess - 2), min(vmax, guess + 2) + 1)
        return min(
            candidates, key=lambda v: (self._distance(self.decode_code(v), x), abs(v - guess), v)
        )

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"name": self.name, "kind": self.kind.value, "bpp": self.bpp}
        if self.kind is DimensionKind.CATEGORICAL_SET:
            data["choices"] = list(self.choices)
        elif self.kind is not DimensionKind.BINARY_FLAG:
            data["lo"] = self.lo
            data["hi"] = self.hi
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DimensionSpec":
        try:
            return cls(
                name=data["name"],
                kind=data["kind"],
                lo=float(data.get("lo", 0.0)),
                hi=float(data.get("hi", 1.0)),
                choices=data.get("choices"),
                bpp=int(data.get("bpp", 1)),
            )
        except KeyError as e:
            raise ConfigError(f"维度定义缺少字段: {e}") from e


@dataclass(frozen=True)
class SpaceSpec:
    """搜索空间：前 n_feat 个维度是特征掩码，其后是结构/训练超参数"""

    n_feat: int
    dims: Tuple[DimensionSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if self.n_feat < 0 or self.n_feat > len(self.dims):
            raise ConfigError(f"n_feat 超出维度数: {self.n_feat}")
        for dim in self.dims[: self.n_feat]:
            if dim.kind is not DimensionKind.BINARY_FLAG:
                raise ConfigError(f"特征掩码维度 '{dim.name}' 必须是 binary_flag")
        names = [d.name for d in self.dims]
        if len(names) != len(set(names)):
            raise ConfigError("维度名重复")

    @property
    def total_bits(self) -> int:
        return sum(d.bpp for d in self.dims)

    @property
    def offsets(self) -> List[int]:
        """每个维度在比特串中的起始位置"""
        out, pos = [], 0
        for d in self.dims:
            out.append(pos)
            pos += d.bpp
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {"n_feat": self.n_feat, "dims": [d.to_dict() for d in self.dims]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SpaceSpec":
        return cls(int(data["n_feat"]), tuple(DimensionSpec.from_dict(d) for d in data["dims"]))


@dataclass(frozen=True)
class HyperparamVector:
    """解码后的一个候选：特征掩码 + 各超参数取值"""

    feature_mask: Tuple[int, ...]
    values: Dict[str, Any] = field(default_factory=dict)

    @property
    def dropout(self) -> float:
        return self.values["dropout"]

    @property
    def hidden_width(self) -> int:
        return self.values["hidden_width"]

    @property
    def learning_rate(self) -> float:
        return self.values["learning_rate"]

    @property
    def batch_size(self) -> int:
        return self.values["batch_size"]

    @property
    def weight_decay(self) -> float:
        return self.values["weight_decay"]

    @property
    def n_hidden_layers(self) -> int:
        return self.values["n_hidden_layers"]

    @property
    def n_selected(self) -> int:
        return int(sum(self.feature_mask))

    def to_dict(self) -> Dict[str, Any]:
        return {"feature_mask": list(self.feature_mask), **self.values}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "HyperparamVector":
        values = {k: v for k, v in data.items() if k != "feature_mask"}
        return cls(tuple(int(b) for b in data.get("feature_mask", ())), values)


def _segment_value(segment: np.ndarray) -> int:
    # 段内高位在前
    v = 0
    for bit in segment:
        v = (v << 1) | int(bit)
    return v


def decode(
    bits: Sequence[int],
    space: SpaceSpec,
    p1: Optional[Sequence[float]] = None,
) -> HyperparamVector:
    """比特串 → HyperparamVector

    Args:
        bits: 长度为 space.total_bits 的 0/1 序列
        space: 搜索空间
        p1: 可选，每个量子比特的 P(1)；掩码全 0 时用于挑选修复位

    Returns:
        解码结果；掩码全 0 时强制置位 P(1) 最大的特征（无 p1 时取第 0 个）
    """
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 1 or len(bits) != space.total_bits:
        raise StructuralError(f"比特串长度 {len(bits)} 与空间总比特数 {space.total_bits} 不符")

    mask: List[int] = []
    values: Dict[str, Any] = {}
    for i, (dim, start) in enumerate(zip(space.dims, space.offsets)):
        v = _segment_value(bits[start : start + dim.bpp])
        value = dim.decode_code(v)
        if i < space.n_feat:
            mask.append(int(value))
        else:
            values[dim.name] = value

    if space.n_feat > 0 and not any(mask):
        if p1 is not None:
            feat_p1 = np.asarray([p1[s] for s in space.offsets[: space.n_feat]], dtype=float)
            mask[int(np.argmax(feat_p1))] = 1
        else:
            mask[0] = 1
    return HyperparamVector(tuple(mask), values)


def encode_point(h: HyperparamVector, space: SpaceSpec) -> np.ndarray:
    """decode 的最近码字逆映射"""
    if len(h.feature_mask) != space.n_feat:
        raise StructuralError(f"特征掩码长度 {len(h.feature_mask)} 与 n_feat={space.n_feat} 不符")
    if space.n_feat > 0 and not any(h.feature_mask):
        raise DomainError("特征掩码至少需要一个特征")

    bits: List[int] = []
    for i, dim in enumerate(space.dims):
        if i < space.n_feat:
            x = h.feature_mask[i]
        else:
            if dim.name not in h.values:
                raise DomainError(f"缺少超参数: {dim.name}")
            x = h.values[dim.name]
        v = dim.encode_value(x)
        bits.extend((v >> (dim.bpp - 1 - j)) & 1 for j in range(dim.bpp))
    return np.array(bits, dtype=np.int8)


def default_space(n_feat: int, bpp: Optional[Mapping[str, int]] = None) -> SpaceSpec:
    """默认搜索空间：n_feat 个掩码位 + 六个结构维度

    Args:
        n_feat: 输入特征数
        bpp: 可选，按维度名覆盖默认比特数
    """
    if n_feat < 1:
        raise DomainError(f"n_feat 必须 ≥ 1: {n_feat}")
    bpp = dict(bpp or {})
    unknown = set(bpp) - set(ARCH_DIMS)
    if unknown:
        raise ConfigError(f"未知的 bpp 覆盖维度: {sorted(unknown)}")

    mask_dims = [DimensionSpec(f"mask_{i}", DimensionKind.BINARY_FLAG) for i in range(n_feat)]
    arch_dims = [
        DimensionSpec("dropout", DimensionKind.CONTINUOUS, 0.0, 0.5, bpp=bpp.get("dropout", 8)),
        DimensionSpec(
            "hidden_width", DimensionKind.INTEGER_RANGE, 8, 64, bpp=bpp.get("hidden_width", 6)
        ),
        DimensionSpec(
            "learning_rate",
            DimensionKind.LOG_CONTINUOUS,
            1e-4,
            1e-1,
            bpp=bpp.get("learning_rate", 8),
        ),
        DimensionSpec(
            "batch_size",
            DimensionKind.CATEGORICAL_SET,
            choices=BATCH_SIZES,
            bpp=bpp.get("batch_size", 3),
        ),
        DimensionSpec(
            "weight_decay", DimensionKind.LOG_CONTINUOUS, 1e-6, 1e-2, bpp=bpp.get("weight_decay", 8)
        ),
        DimensionSpec(
            "n_hidden_layers", DimensionKind.INTEGER_RANGE, 1, 4, bpp=bpp.get("n_hidden_layers", 2)
        ),
    ]
    return SpaceSpec(n_feat, tuple(mask_dims + arch_dims))
