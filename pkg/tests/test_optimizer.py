"""optimizer：种群初始化、吸引子、QPSO 位移、旋转角、迭代与完整运行"""

import math
import threading
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from qibonn.encoding import DimensionKind, DimensionSpec, SpaceSpec, default_space
from qibonn.errors import ConfigError
from qibonn.optimizer import (
    EvalResult,
    OptimizerConfig,
    Particle,
    SwarmState,
    compute_attractor,
    init_swarm,
    particle_rngs,
    qpso_displacement,
    rotation_angle,
    run,
    step,
)
from qibonn.qsim import NoiseKind, NoiseSpec, QubitRegister, QubitState, prepare_qubit, rotate

TARGET = (1, 0, 1, 1, 0, 0, 1, 0)


def flag_space(n: int = 8) -> SpaceSpec:
    return SpaceSpec(0, tuple(DimensionSpec(f"b{i}", DimensionKind.BINARY_FLAG) for i in range(n)))


def hamming(h) -> float:
    """8 个二值维度上到目标点的平方距离（球面型玩具目标）"""
    return float(sum((h.values[f"b{i}"] - t) ** 2 for i, t in enumerate(TARGET)))


class CountingObjective:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0
        self._lock = threading.Lock()

    def evaluate(self, h):
        with self._lock:
            self.calls += 1
        return EvalResult(self.fn(h))


def test_config_validation():
    with pytest.raises(ConfigError):
        OptimizerConfig(pop_size=1)
    with pytest.raises(ConfigError):
        OptimizerConfig(max_iter=0)
    with pytest.raises(ConfigError):
        OptimizerConfig(theta_clip=2.0)
    with pytest.raises(ConfigError):
        OptimizerConfig(alpha_step=0.0)
    cfg = OptimizerConfig(noise={"kind": "bit_flip", "strength": 0.01})
    assert cfg.noise == NoiseSpec(NoiseKind.BIT_FLIP, 0.01)
    assert OptimizerConfig().budget == 510


def test_init_swarm_uniform_registers_and_tie_break():
    cfg = OptimizerConfig(pop_size=2, max_iter=1, seed=3)
    swarm = init_swarm(flag_space(), lambda h: 1.0, cfg)
    for p in swarm.particles:
        np.testing.assert_allclose(p.register.probabilities(), 0.5)
    assert swarm.g_best_fitness == 1.0
    np.testing.assert_array_equal(swarm.g_best_bits, swarm.particles[0].p_best_bits)


def test_init_swarm_picks_population_minimum():
    space = default_space(6)
    cfg = OptimizerConfig(pop_size=8, seed=11)
    swarm = init_swarm(space, lambda h: float(h.n_selected), cfg)
    assert swarm.g_best_fitness == min(p.p_best_fitness for p in swarm.particles)
    assert swarm.g_best_h.n_selected == swarm.g_best_fitness


def test_attractor_is_mean_of_personal_bests():
    register = QubitRegister.uniform(3)
    rngs = particle_rngs(0, 3)
    bests = [np.array([1, 0, 1]), np.array([1, 1, 1]), np.array([0, 0, 1])]
    particles = [Particle(register, rng, b, b, 0.0) for rng, b in zip(rngs, bests)]
    swarm = SwarmState(particles, bests[0], 0.0, None)
    np.testing.assert_allclose(compute_attractor(swarm), [2 / 3, 1 / 3, 1.0])

    same = SwarmState([replace(p, p_best_bits=bests[0]) for p in particles], bests[0], 0.0, None)
    np.testing.assert_array_equal(compute_attractor(same), [1.0, 0.0, 1.0])


def test_qpso_displacement_statistics():
    rng = np.random.default_rng(20)
    n = 100_000
    draws = np.array([qpso_displacement(1, 0, 0.7, rng) for _ in range(n)])
    assert abs(draws.mean() - 0.7) < 3 * 0.7 / math.sqrt(n)
    # 指数分布 Var(s²) ≈ 8σ⁴/n
    assert abs(draws.var() - 0.49) < 3 * math.sqrt(8 / n) * 0.49
    ks = stats.kstest(draws[:5000], "expon", args=(0, 0.7))
    assert ks.pvalue > 0.01
    assert all(qpso_displacement(1, 1, 0.7, rng) == 0.0 for _ in range(100))


def test_rotation_angle_is_zero_at_attractor_with_agreeing_bests():
    rng = np.random.default_rng(21)
    cfg = OptimizerConfig()
    q = prepare_qubit(0.3)
    assert abs(rotation_angle(q, q.p1, 1, 1, cfg, rng)) == 0.0


def test_rotation_angle_is_clipped_and_points_toward_global_best():
    rng = np.random.default_rng(22)
    cfg = OptimizerConfig()
    for _ in range(2000):
        phi = rng.uniform(0.0, math.pi / 2 - cfg.theta_clip)
        q = QubitState(math.cos(phi), math.sin(phi))
        m_d = rng.uniform(0, 1)
        pb_d = int(rng.integers(2))
        dtheta = rotation_angle(q, m_d, 1, pb_d, cfg, rng)
        assert abs(dtheta) <= cfg.theta_clip
        assert rotate(q, dtheta).p1 >= q.p1 - 1e-12


def test_rotation_direction_respects_orientation():
    rng = np.random.default_rng(23)
    cfg = OptimizerConfig()
    # a > 0, b < 0：增大 P(1) 需要负向旋转
    phi = -math.pi / 4
    q = QubitState(math.cos(phi), math.sin(phi))
    for _ in range(200):
        dtheta = rotation_angle(q, 0.9, 1, 0, cfg, rng)
        assert dtheta <= 0.0
        assert rotate(q, dtheta).p1 >= q.p1 - 1e-12


def test_degenerate_swarm_at_poles_is_a_fixed_point():
    space = flag_space(4)
    cfg = OptimizerConfig(pop_size=3, max_iter=1, p_mut=0.0)
    bits = np.array([1, 0, 0, 1], dtype=np.int8)
    register = QubitRegister.from_states(
        QubitState(0.0, 1.0) if b else QubitState(1.0, 0.0) for b in bits
    )
    particles = [Particle(register, rng, bits, bits.copy(), 0.0) for rng in particle_rngs(5, 3)]
    swarm = SwarmState(particles, bits.copy(), 0.0, None)

    after = step(swarm, space, lambda h: 0.0, cfg)
    for p in after.particles:
        np.testing.assert_allclose(p.register.probabilities(), bits, atol=1e-12)
        np.testing.assert_array_equal(p.last_bits, bits)


def test_run_budget_elitism_and_attractor_bounds():
    space = default_space(5)
    noise = NoiseSpec(NoiseKind.DEPOLARIZING, 0.02)
    cfg = OptimizerConfig(pop_size=4, max_iter=6, seed=7, noise=noise)
    obj = CountingObjective(lambda h: h.n_selected + h.dropout)
    _, trace = run(space, obj, cfg)
    assert obj.calls == len(trace) == cfg.budget

    best = math.inf
    for it in range(cfg.max_iter + 1):
        rows = [r for r in trace if r.iteration == it]
        assert [r.particle for r in rows] == list(range(cfg.pop_size))
        new_best = min(best, min(r.fitness for r in rows))
        assert new_best <= best
        best = new_best

    swarm = init_swarm(space, obj, cfg)
    for _ in range(cfg.max_iter):
        swarm = step(swarm, space, obj, cfg)
        m = compute_attractor(swarm)
        assert np.all((m >= 0.0) & (m <= 1.0))
        assert swarm.g_best_fitness == min(p.p_best_fitness for p in swarm.particles)


def test_run_returns_best_traced_candidate():
    cfg = OptimizerConfig(pop_size=2, max_iter=1, seed=9)
    best_h, trace = run(flag_space(), hamming, cfg)
    assert len(trace) == 4
    assert hamming(best_h) == min(r.fitness for r in trace)


def test_run_is_deterministic_and_independent_of_n_jobs():
    space = default_space(4)
    noise = NoiseSpec(NoiseKind.BIT_FLIP, 0.01)
    cfg = OptimizerConfig(pop_size=5, max_iter=4, seed=13, noise=noise)
    fn = lambda h: h.learning_rate * h.n_selected  # noqa: E731
    _, first = run(space, fn, cfg)
    _, second = run(space, fn, cfg)
    _, threaded = run(space, fn, replace(cfg, n_jobs=4))
    assert [r.to_dict() for r in first] == [r.to_dict() for r in second]
    assert [r.to_dict() for r in first] == [r.to_dict() for r in threaded]


def test_failed_evaluations_score_infinity():
    def flaky(h):
        if h.values["b0"] == 1:
            raise RuntimeError("boom")
        return 1.0

    cfg = OptimizerConfig(pop_size=4, max_iter=3, seed=1)
    _, trace = run(flag_space(), flaky, cfg)
    failed = [r for r in trace if r.error]
    assert failed and all(math.isinf(r.fitness) and "RuntimeError" in r.error for r in failed)
    assert all(r.to_dict()["J"] is None for r in failed)
    assert len(trace) == cfg.budget


def test_search_improves_on_initial_population():
    init_best, final_best = [], []
    for seed in range(20):
        _, trace = run(flag_space(), hamming, OptimizerConfig(pop_size=10, max_iter=50, seed=seed))
        init_best.append(min(r.fitness for r in trace if r.iteration == 0))
        final_best.append(min(r.fitness for r in trace))
    assert np.mean(final_best) < np.mean(init_best)
    assert np.mean(final_best) <= 1.0


@pytest.mark.slow
def test_sphere_toy_against_uniform_random_samples():
    wins = 0
    for seed in range(20):
        cfg = OptimizerConfig(pop_size=10, max_iter=50, seed=seed)
        _, trace = run(flag_space(), hamming, cfg)
        rng = np.random.default_rng(1000 + seed)
        samples = rng.integers(0, 2, size=(cfg.budget, len(TARGET)))
        random_best = np.min(((samples - np.array(TARGET)) ** 2).sum(axis=1))
        wins += min(r.fitness for r in trace) <= random_best
    assert wins >= 18
