"""单量子比特经典模拟：旋转、量子变异、测量与三种噪声信道

所有振幅取实数（相位只保留符号），噪声按量子轨迹方式随机展开：
每次调用只走一条分支，统计意义上与密度矩阵描述一致。
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class QubitState:
    """实振幅量子比特 a|0⟩ + b|1⟩，满足 a² + b² = 1"""

    a: float
    b: float

    @property
    def p1(self) -> float:
        """测得 1 的概率（Born 规则）"""
        return self.b * self.b

    @property
    def norm(self) -> float:
        return math.hypot(self.a, self.b)


class NoiseKind(str, Enum):
    NONE = "none"
    BIT_FLIP = "bit_flip"
    DEPOLARIZING = "depolarizing"
    AMPLITUDE_DAMPING = "amplitude_damping"


@dataclass(frozen=True)
class NoiseSpec:
    """单比特噪声信道描述

    Args:
        kind: 信道类型
        strength: 比特翻转/去极化的概率 p，或振幅阻尼的 γ
    """

    kind: NoiseKind = NoiseKind.NONE
    strength: float = 0.0

    def __post_init__(self):
        try:
            kind = NoiseKind(self.kind)
        except ValueError as e:
            raise ConfigError(f"未知的噪声类型: {self.kind}") from e
        object.__setattr__(self, "kind", kind)
        if kind is not NoiseKind.NONE and not 0.0 <= float(self.strength) <= 1.0:
            raise ConfigError(f"噪声强度必须在 [0, 1] 内: {self.strength}")
        object.__setattr__(self, "strength", float(self.strength))

    @property
    def label(self) -> str:
        """条件名，例如 'noiseless' 或 'bit_flip:0.005'"""
        if self.kind is NoiseKind.NONE:
            return "noiseless"
        return f"{self.kind.value}:{self.strength:g}"

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """从 'kind:strength' 形式的字符串解析（'none'/'noiseless' 表示无噪声）"""
        text = text.strip()
        if text in ("none", "noiseless", ""):
            return cls()
        kind, _, strength = text.partition(":")
        try:
            return cls(NoiseKind(kind), float(strength))
        except ValueError as e:
            raise ConfigError(f"无法解析噪声条件: {text}") from e

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "strength": self.strength}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        return cls(data.get("kind", "none"), data.get("strength", 0.0))


def _normalized(a: float, b: float) -> QubitState:
    n = math.hypot(a, b)
    return QubitState(a / n, b / n)


def prepare_qubit(p1: float) -> QubitState:
    """制备测得 1 的概率为 p1 的态 (√(1−p1), √p1)"""
    if not 0.0 <= p1 <= 1.0:
        raise DomainError(f"概率必须在 [0, 1] 内: {p1}")
    return QubitState(math.sqrt(1.0 - p1), math.sqrt(p1))


def rotate(q: QubitState, dtheta: float) -> QubitState:
    """施加 R(Δθ)：(a cosΔθ − b sinΔθ, a sinΔθ + b cosΔθ)"""
    c, s = math.cos(dtheta), math.sin(dtheta)
    return _normalized(q.a * c - q.b * s, q.a * s + q.b * c)


def sample_mutation_angle(theta_max: float, p_mut: float, rng: np.random.Generator) -> float:
    """以概率 p_mut 抽取 θ_mut ~ U(−θ_max, θ_max)，否则返回 0"""
    if rng.random() < p_mut:
        return float(rng.uniform(-theta_max, theta_max))
    return 0.0


def mutate(q: QubitState, theta_max: float, p_mut: float, rng: np.random.Generator) -> QubitState:
    """量子变异：随机旋转，保持种群多样性"""
    angle = sample_mutation_angle(theta_max, p_mut, rng)
    if angle == 0.0:
        return q
    return rotate(q, angle)


def measure(q: QubitState, rng: np.random.Generator) -> int:
    """测量一次，不修改 q（寄存器每轮重新采样）"""
    return 1 if rng.random() < q.p1 else 0


def _pauli(q: QubitState, which: int) -> QubitState:
    # 0=X, 1=Y, 2=Z；Y/Z 去掉全局相位后只剩符号翻转
    if which == 0:
        return QubitState(q.b, q.a)
    if which == 1:
        return QubitState(q.b, -q.a)
    return QubitState(q.a, -q.b)


def apply_noise(q: QubitState, spec: NoiseSpec, rng: np.random.Generator) -> QubitState:
    """按 NoiseSpec 施加一次单比特噪声（轨迹展开），结果重新归一化"""
    kind, p = spec.kind, spec.strength
    if kind is NoiseKind.NONE:
        return q

    if kind is NoiseKind.BIT_FLIP:
        if rng.random() < p:
            q = _pauli(q, 0)
    elif kind is NoiseKind.DEPOLARIZING:
        if rng.random() < p:
            q = _pauli(q, int(rng.integers(3)))
    elif kind is NoiseKind.AMPLITUDE_DAMPING:
        # 跃迁分支概率 γ·b²，否则施加 K₀ = diag(1, √(1−γ))
        if rng.random() < p * q.p1:
            return QubitState(1.0, 0.0)
        return _normalized(q.a, q.b * math.sqrt(1.0 - p))
    return _normalized(q.a, q.b)


@dataclass(frozen=True)
class QubitRegister:
    """单个粒子的量子寄存器：每个搜索维度一个量子比特"""

    qubits: Tuple[QubitState, ...]

    def __len__(self) -> int:
        return len(self.qubits)

    def __iter__(self):
        return iter(self.qubits)

    def __getitem__(self, index: int) -> QubitState:
        return self.qubits[index]

    @classmethod
    def uniform(cls, n_qubits: int) -> "QubitRegister":
        """所有比特处于均匀叠加态 P(1)=0.5"""
        q = prepare_qubit(0.5)
        return cls(tuple(q for _ in range(n_qubits)))

    @classmethod
    def from_states(cls, states: Iterable[QubitState]) -> "QubitRegister":
        return cls(tuple(states))

    def probabilities(self) -> np.ndarray:
        return np.array([q.p1 for q in self.qubits], dtype=float)

    def measure(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([measure(q, rng) for q in self.qubits], dtype=np.int8)

    def with_noise(self, spec: NoiseSpec, rng: np.random.Generator) -> "QubitRegister":
        if spec.kind is NoiseKind.NONE:
            return self
        return QubitRegister(tuple(apply_noise(q, spec, rng) for q in self.qubits))


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join("1" if int(b) else "0" for b in bits)


def str_to_bits(text: str) -> np.ndarray:
    return np.array([1 if c == "1" else 0 for c in text], dtype=np.int8)
