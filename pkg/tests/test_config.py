"""config：RunConfig 读写、点路径覆盖、结构别名与环境变量"""

import json

import pytest

from qibonn.config import (
    RunConfig,
    apply_overrides,
    build_run_config,
    default_log_level,
    load_environment,
)
from qibonn.encoding import DimensionKind, DimensionSpec, SpaceSpec, default_space
from qibonn.errors import ConfigError
from qibonn.optimizer import OptimizerConfig
from qibonn.qsim import NoiseKind, NoiseSpec


def test_defaults():
    cfg = RunConfig()
    assert cfg.dataset == "synthetic"
    assert cfg.arch_kind == "shallow"
    assert cfg.optimizer.pop_size == 10 and cfg.optimizer.max_iter == 50
    assert cfg.split.train_frac == 0.6


def test_round_trip_through_dict():
    cfg = RunConfig(
        dataset="synth:n=200,informative=3",
        arch_kind="deep",
        optimizer=OptimizerConfig(
            pop_size=4, max_iter=3, noise=NoiseSpec(NoiseKind.BIT_FLIP, 0.005)
        ),
        repeats=2,
        space_bpp={"dropout": 4},
    )
    assert cfg.arch_kind == "deep_mlp"
    restored = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert restored == cfg


@pytest.mark.parametrize(
    "data",
    [
        {"unknown": 1},
        {"optimizer": {"seed": 3}},
        {"optimizer": {"population": 3}},
        {"split": {"ratio": 0.5}},
        {"arch_kind": "cnn"},
        {"repeats": 0},
        {"space_bpp": {"momentum": 3}},
        {"optimizer": {"noise": "thermal:0.1"}},
        {"space": {"dims": []}},
        {"space": default_space(2).to_dict(), "space_bpp": {"dropout": 3}},
        {"space": SpaceSpec(1, (DimensionSpec("mask_0", DimensionKind.BINARY_FLAG),)).to_dict()},
        [1, 2, 3],
    ],
)
def test_invalid_configs_raise_config_error(data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_custom_space_travels_through_config():
    space = default_space(4, {"dropout": 3, "batch_size": 2})
    cfg = RunConfig(dataset="synth:n=90,informative=2,noise=2", space=space)
    restored = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert restored == cfg
    assert restored.space_for(4) == space
    with pytest.raises(ConfigError):
        restored.space_for(5)
    assert RunConfig(space_bpp={"dropout": 3}).space_for(3) == default_space(3, {"dropout": 3})


def test_noise_string_is_parsed():
    cfg = RunConfig.from_dict({"optimizer": {"noise": "depolarizing:0.02"}})
    assert cfg.optimizer.noise == NoiseSpec(NoiseKind.DEPOLARIZING, 0.02)


def test_per_repeat_seeds():
    cfg = RunConfig(seed=7, n_jobs=3)
    opt = cfg.optimizer_for(2)
    assert opt.seed == 9 and opt.n_jobs == 3
    assert cfg.split_for(2).seed == cfg.split.seed + 2


def test_apply_overrides():
    data = apply_overrides(
        {"optimizer": {"pop_size": 10}},
        [
            "optimizer.pop_size=6",
            "split.stratified=false",
            "dataset=my data.csv",
            "optimizer.noise.kind=bit_flip",
        ],
    )
    assert data["optimizer"]["pop_size"] == 6
    assert data["split"]["stratified"] is False
    assert data["dataset"] == "my data.csv"
    assert data["optimizer"]["noise"] == {"kind": "bit_flip"}

    with pytest.raises(ConfigError):
        apply_overrides({}, ["no_equals_sign"])
    with pytest.raises(ConfigError):
        apply_overrides({"seed": 1}, ["seed.inner=2"])


def test_build_run_config_from_file(tmp_path):
    path = tmp_path / "run.json"
    data = {"dataset": "pima-scale", "optimizer": {"pop_size": 4}}
    path.write_text(json.dumps(data), encoding="utf-8")
    cfg = build_run_config(path, ["optimizer.max_iter=2", "arch_kind=res"])
    assert cfg.dataset == "pima-scale"
    assert cfg.optimizer.pop_size == 4 and cfg.optimizer.max_iter == 2
    assert cfg.arch_kind == "res_mlp"

    with pytest.raises(ConfigError):
        build_run_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        build_run_config(broken)


def test_environment_log_level(tmp_path, monkeypatch):
    monkeypatch.setenv("QIBONN_LOG_LEVEL", "warning")
    assert default_log_level() == "WARNING"
    monkeypatch.delenv("QIBONN_LOG_LEVEL")
    assert default_log_level() == "INFO"
    env = tmp_path / ".env"
    env.write_text("QIBONN_LOG_LEVEL=debug\n", encoding="utf-8")
    load_environment(env)
    assert default_log_level() == "DEBUG"
