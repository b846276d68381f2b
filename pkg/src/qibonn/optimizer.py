"""上层优化循环：量子比特寄存器种群、个体/全局最优、量子吸引子与旋转/变异更新"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from .encoding import HyperparamVector, SpaceSpec, decode
from .errors import ConfigError
from .qsim import NoiseSpec, QubitRegister, QubitState, bits_to_str, mutate, rotate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    """QIBONN 上层优化参数

    alpha_step 是 QPSO 收缩-扩张系数；theta_clip 限制单步旋转角。
    """

    pop_size: int = 10
    max_iter: int = 50
    alpha_step: float = 0.75
    p_mut: float = 0.05
    theta_max: float = math.pi / 10
    theta_clip: float = math.pi / 8
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseSpec.from_dict(self.noise))
        if self.max_iter < 1:
            raise ConfigError(f"max_iter 必须 ≥ 1: {self.max_iter}")
        if self.pop_size < 2:
            raise ConfigError(f"pop_size 必须 ≥ 2: {self.pop_size}")
        if not self.alpha_step > 0:
            raise ConfigError(f"alpha_step 必须 > 0: {self.alpha_step}")
        if not 0.0 <= self.p_mut <= 1.0:
            raise ConfigError(f"p_mut 必须在 [0, 1] 内: {self.p_mut}")
        if self.theta_max < 0:
            raise ConfigError(f"theta_max 必须 ≥ 0: {self.theta_max}")
        if not 0.0 < self.theta_clip <= math.pi / 2:
            raise ConfigError(f"theta_clip 必须在 (0, π/2] 内: {self.theta_clip}")
        if self.n_jobs < 1:
            raise ConfigError(f"n_jobs 必须 ≥ 1: {self.n_jobs}")

    @property
    def budget(self) -> int:
        """目标函数评估总次数（含初始化一轮）"""
        return self.pop_size * (self.max_iter + 1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pop_size": self.pop_size,
            "max_iter": self.max_iter,
            "alpha_step": self.alpha_step,
            "p_mut": self.p_mut,
            "theta_max": self.theta_max,
            "theta_clip": self.theta_clip,
            "noise": self.noise.to_dict(),
            "seed": self.seed,
            "n_jobs": self.n_jobs,
        }


@dataclass
class EvalResult:
    """一次目标函数评估：J(h) 越小越好"""

    fitness: float
    metrics: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None


class Objective(Protocol):
    def evaluate(self, h: HyperparamVector) -> EvalResult: ...


ObjectiveLike = Union[Objective, Callable[[HyperparamVector], Union[float, EvalResult]]]


@dataclass
class EvalRecord:
    """评估轨迹中的一行"""

    iteration: int
    particle: int
    bits: str
    h: HyperparamVector
    fitness: float
    metrics: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        finite = math.isfinite(self.fitness)
        return {
            "iteration": self.iteration,
            "particle": self.particle,
            "bits": self.bits,
            "h": self.h.to_dict(),
            "J": self.fitness if finite else None,
            "metrics": self.metrics,
            "error": self.error,
        }


@dataclass
class Particle:
    register: QubitRegister
    rng: np.random.Generator
    last_bits: np.ndarray
    p_best_bits: np.ndarray
    p_best_fitness: float


@dataclass
class SwarmState:
    particles: List[Particle]
    g_best_bits: np.ndarray
    g_best_fitness: float
    g_best_h: HyperparamVector
    iteration: int = 0


def particle_rngs(seed: int, n: int) -> List[np.random.Generator]:
    """每个粒子一条独立随机流，由 (seed, 粒子序号) 唯一确定"""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def evaluate_candidate(obj: ObjectiveLike, h: HyperparamVector) -> EvalResult:
    """调用目标函数；任何异常都记为 +∞ 并带上错误标签"""
    try:
        result = obj.evaluate(h) if hasattr(obj, "evaluate") else obj(h)
    except Exception as e:
        return EvalResult(math.inf, {}, f"{type(e).__name__}: {e}")
    if not isinstance(result, EvalResult):
        result = EvalResult(float(result))
    if math.isnan(result.fitness):
        return EvalResult(math.inf, result.metrics, result.error or "non_finite_fitness")
    return result


def evaluate_batch(
    obj: ObjectiveLike, hs: Sequence[HyperparamVector], n_jobs: int
) -> List[EvalResult]:
    if n_jobs > 1 and len(hs) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(lambda h: evaluate_candidate(obj, h), hs))
    return [evaluate_candidate(obj, h) for h in hs]


def _sample(
    register: QubitRegister, space: SpaceSpec, cfg: OptimizerConfig, rng: np.random.Generator
) -> Tuple[QubitRegister, np.ndarray, HyperparamVector]:
    # 噪声在更新旋转之后、测量之前施加一次
    register = register.with_noise(cfg.noise, rng)
    bits = register.measure(rng)
    h = decode(bits, space, register.probabilities())
    return register, bits, h


def _record(
    trace: Optional[List[EvalRecord]],
    iteration: int,
    particle: int,
    bits: np.ndarray,
    h: HyperparamVector,
    result: EvalResult,
) -> None:
    if result.error:
        logger.warning("评估失败 (iter=%d, particle=%d): %s", iteration, particle, result.error)
    else:
        logger.debug("iter=%d particle=%d J=%.6f", iteration, particle, result.fitness)
    if trace is not None:
        record = EvalRecord(
            iteration,
            particle,
            bits_to_str(bits),
            h,
            result.fitness,
            result.metrics,
            result.error,
        )
        trace.append(record)


def init_swarm(
    space: SpaceSpec,
    obj: ObjectiveLike,
    cfg: OptimizerConfig,
    rngs: Optional[Sequence[np.random.Generator]] = None,
    trace: Optional[List[EvalRecord]] = None,
) -> SwarmState:
    """初始化种群：所有比特处于均匀叠加态，各测量评估一次"""
    rngs = list(rngs) if rngs is not None else particle_rngs(cfg.seed, cfg.pop_size)
    if len(rngs) != cfg.pop_size:
        raise ConfigError(f"随机流数量 {len(rngs)} 与 pop_size={cfg.pop_size} 不符")

    sampled = [_sample(QubitRegister.uniform(space.total_bits), space, cfg, rng) for rng in rngs]
    results = evaluate_batch(obj, [h for _, _, h in sampled], cfg.n_jobs)

    particles: List[Particle] = []
    best_i = 0
    for i, ((register, bits, h), result) in enumerate(zip(sampled, results)):
        _record(trace, 0, i, bits, h, result)
        particles.append(Particle(register, rngs[i], bits, bits.copy(), result.fitness))
        if result.fitness < particles[best_i].p_best_fitness:
            best_i = i

    logger.info("初始化完成: g_best J=%.6f (particle %d)", particles[best_i].p_best_fitness, best_i)
    return SwarmState(
        particles=particles,
        g_best_bits=particles[best_i].p_best_bits.copy(),
        g_best_fitness=particles[best_i].p_best_fitness,
        g_best_h=sampled[best_i][2],
    )


def compute_attractor(swarm: SwarmState) -> np.ndarray:
    """量子吸引子 m_best：各粒子个体最优比特的逐维均值"""
    return np.mean([p.p_best_bits for p in swarm.particles], axis=0).astype(float)


def qpso_displacement(pb_d: int, g_d: int, alpha_step: float, rng: np.random.Generator) -> float:
    """QPSO 位移 α·|p_best − g|·ln(1/u)，ln(1/u) 服从参数为 1 的指数分布"""
    return alpha_step * abs(int(pb_d) - int(g_d)) * float(rng.standard_exponential())


def rotation_angle(
    q: QubitState,
    m_d: float,
    g_d: int,
    pb_d: int,
    cfg: OptimizerConfig,
    rng: np.random.Generator,
) -> float:
    """确定性旋转角：幅度来自与吸引子的距离（指数分布缩放），方向指向 g_best 的比特"""
    attract = cfg.alpha_step * abs(q.p1 - m_d) * float(rng.standard_exponential())
    base_pull = cfg.alpha_step * cfg.theta_clip * qpso_displacement(pb_d, g_d, 1.0, rng)
    magnitude = min(cfg.theta_clip, attract + base_pull)

    sign = 1.0 if int(g_d) == 1 else -1.0
    # a·b < 0 时正向旋转会减小 P(1)
    if q.a * q.b < 0:
        sign = -sign
    return sign * magnitude


def _update_register(
    particle: Particle, m_best: np.ndarray, g_bits: np.ndarray, cfg: OptimizerConfig
) -> QubitRegister:
    rng = particle.rng
    qubits = []
    for d, q in enumerate(particle.register):
        q = rotate(q, rotation_angle(q, m_best[d], g_bits[d], particle.p_best_bits[d], cfg, rng))
        qubits.append(mutate(q, cfg.theta_max, cfg.p_mut, rng))
    return QubitRegister.from_states(qubits)


def step(
    swarm: SwarmState,
    space: SpaceSpec,
    obj: ObjectiveLike,
    cfg: OptimizerConfig,
    trace: Optional[List[EvalRecord]] = None,
) -> SwarmState:
    """一轮迭代：噪声 → 测量 → 评估 → 更新最优 → 吸引子 → 旋转 + 变异"""
    iteration = swarm.iteration + 1
    sampled = [_sample(p.register, space, cfg, p.rng) for p in swarm.particles]
    results = evaluate_batch(obj, [h for _, _, h in sampled], cfg.n_jobs)

    g_bits, g_fitness, g_h = swarm.g_best_bits, swarm.g_best_fitness, swarm.g_best_h
    particles: List[Particle] = []
    for i, (p, (register, bits, h), result) in enumerate(zip(swarm.particles, sampled, results)):
        _record(trace, iteration, i, bits, h, result)
        p = replace(p, register=register, last_bits=bits)
        if result.fitness < p.p_best_fitness:
            p = replace(p, p_best_bits=bits.copy(), p_best_fitness=result.fitness)
        if result.fitness < g_fitness:
            g_bits, g_fitness, g_h = bits.copy(), result.fitness, h
        particles.append(p)

    swarm = SwarmState(particles, g_bits, g_fitness, g_h, iteration)
    m_best = compute_attractor(swarm)
    swarm.particles = [
        replace(p, register=_update_register(p, m_best, g_bits, cfg)) for p in particles
    ]

    logger.info("迭代 %d/%d: g_best J=%.6f", iteration, cfg.max_iter, g_fitness)
    return swarm


def run(
    space: SpaceSpec,
    obj: ObjectiveLike,
    cfg: OptimizerConfig,
) -> Tuple[HyperparamVector, List[EvalRecord]]:
    """完整执行初始化 + max_iter 轮迭代，返回 g_best 解码结果与评估轨迹"""
    trace: List[EvalRecord] = []
    swarm = init_swarm(space, obj, cfg, trace=trace)
    for _ in range(cfg.max_iter):
        swarm = step(swarm, space, obj, cfg, trace=trace)
    return swarm.g_best_h, trace
