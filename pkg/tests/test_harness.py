"""harness / app：调参与基线运行、结果落盘、噪声扫描、汇总报告与命令行"""

import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from qibonn import app
from qibonn.config import RunConfig
from qibonn.data_loader import bundled
from qibonn.exporters import Exporter, markdown_table
from qibonn.harness import (
    VNN_DEFAULTS,
    build_report,
    dataset_slug,
    random_search,
    resolve_dataset,
    run_baseline,
    run_noise_sweep,
    run_tune,
    write_report,
    write_run,
    write_sweep,
)
from qibonn.encoding import default_space
from qibonn.errors import ConfigError, DataError
from qibonn.optimizer import OptimizerConfig
from qibonn.qsim import NoiseKind, NoiseSpec

TINY = "synth:n=90,informative=2,noise=2,seed=1"


@pytest.fixture
def tiny_cfg():
    return RunConfig(
        dataset=TINY,
        optimizer=OptimizerConfig(pop_size=2, max_iter=2),
        inner_epochs=1,
        final_epochs=2,
        repeats=2,
        seed=3,
    )


def test_tune_smoke_run(tiny_cfg):
    report = run_tune(tiny_cfg)
    assert len(report.repeats) == 2
    for r in report.repeats:
        assert r.n_evaluations == tiny_cfg.optimizer.budget == 6
        assert 0.0 <= r.mask_recall <= 1.0
        assert len(r.curves["train_loss"]) == len(r.curves["holdout_loss"]) == 2
        assert r.best_val_fitness == min(rec.fitness for rec in r.trace)
    assert [r.seed for r in report.repeats] == [3, 4]

    summary = report.summary()
    values = [r.test["roc_auc"] for r in report.repeats]
    assert summary["roc_auc"]["mean"] == pytest.approx(sum(values) / 2)
    assert summary["roc_auc"]["n"] == 2
    assert len(report.curves_frame()) == 4


def test_runs_are_byte_identical(tiny_cfg, tmp_path):
    first = write_run(run_tune(tiny_cfg), tmp_path / "a")
    second = write_run(run_tune(tiny_cfg), tmp_path / "b")
    for name in ("trace.jsonl", "report.json", "config.json", "curves.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

    lines = (first / "trace.jsonl").read_text(encoding="utf-8").splitlines()
    rows = [json.loads(line) for line in lines]
    assert len(rows) == 12
    assert {row["repeat"] for row in rows} == {0, 1}
    assert set(rows[0]) >= {"iteration", "particle", "bits", "h", "J", "metrics", "error"}
    metadata = json.loads((first / "metadata.json").read_text(encoding="utf-8"))
    assert "wall_clock_seconds" in metadata


def test_vnn_baseline_uses_all_features(tiny_cfg):
    report = run_baseline(tiny_cfg, "vnn")
    assert report.budget == 0
    for r in report.repeats:
        assert r.n_evaluations == 0
        assert r.best_h.n_selected == 4
        assert r.best_h.values == VNN_DEFAULTS
        assert r.best_val_fitness is None
    with pytest.raises(ConfigError):
        run_baseline(tiny_cfg, "grid")


def test_random_search_has_budget_parity(tiny_cfg):
    tuned = run_tune(tiny_cfg)
    searched = run_baseline(tiny_cfg, "random_search")
    assert [r.n_evaluations for r in searched.repeats] == [r.n_evaluations for r in tuned.repeats]
    assert searched.budget == tuned.budget


def test_random_search_is_seeded_and_grouped():
    space = default_space(3)
    fn = lambda h: float(h.n_selected)  # noqa: E731
    best, trace = random_search(space, fn, budget=7, seed=0, batch_size=3)
    again, trace_again = random_search(space, fn, budget=7, seed=0, batch_size=3, n_jobs=2)
    assert [r.bits for r in trace] == [r.bits for r in trace_again]
    assert [r.iteration for r in trace] == [0, 0, 0, 1, 1, 1, 2]
    assert best.n_selected == min(r.fitness for r in trace) == again.n_selected


def test_resolve_dataset(tiny_cfg, tmp_path):
    cleveland = resolve_dataset(replace(tiny_cfg, dataset="cleveland-scale"))
    assert cleveland.n_samples == bundled("cleveland-scale").n_samples == 303
    assert resolve_dataset(tiny_cfg).n_features == 4
    with pytest.raises(ConfigError):
        resolve_dataset(replace(tiny_cfg, dataset=str(tmp_path / "data.csv")))
    with pytest.raises(DataError):
        resolve_dataset(replace(tiny_cfg, dataset=str(tmp_path / "data.csv"), label_column="y"))


def test_noise_sweep_includes_noiseless_reference(tiny_cfg, tmp_path, monkeypatch):
    cfg = replace(tiny_cfg, repeats=1)
    sweep = run_noise_sweep(cfg, [NoiseSpec(NoiseKind.BIT_FLIP, 0.01)])
    assert list(sweep.table["condition"]) == ["noiseless", "bit_flip:0.01"]
    noiseless = sweep.deltas.set_index("condition").loc["noiseless"]
    assert noiseless["roc_auc_delta"] == 0.0
    assert noiseless["pr_auc_delta"] == 0.0
    assert sweep.reports[1].config.optimizer.noise.kind is NoiseKind.BIT_FLIP

    out = write_sweep(sweep, tmp_path / "sweep")
    assert (out / "sweep.csv").exists() and (out / "deltas.csv").exists()
    assert (out / "noiseless" / "report.json").exists()
    assert (out / "bit_flip_0.01" / "trace.jsonl").exists()

    monkeypatch.setenv("QIBONN_OUTPUT_ROOT", str(tmp_path / "root"))
    default_out = write_sweep(sweep)
    assert default_out.name == "noise-sweep-synth_n=90_informative=2_noise=2_seed=1-shallow-s3"
    assert (default_out / "deltas.csv").exists()


def test_dataset_slug_is_a_plain_directory_name():
    assert dataset_slug("pima-scale") == "pima-scale"
    assert dataset_slug("synth:n=120,sep=1.5") == "synth_n=120_sep=1.5"
    assert dataset_slug("data/clinic.csv") == "clinic"


def test_custom_space_drives_the_search(tiny_cfg):
    space = default_space(4, {"dropout": 2, "learning_rate": 4})
    report = run_tune(replace(tiny_cfg, repeats=1, space=space))
    assert {len(rec.bits) for rec in report.repeats[0].trace} == {space.total_bits}
    with pytest.raises(ConfigError):
        run_tune(replace(tiny_cfg, space=default_space(5)))


def test_report_merges_runs_and_skips_corrupt(tiny_cfg, tmp_path):
    cfg = replace(tiny_cfg, repeats=1)
    tuned = write_run(run_tune(cfg), tmp_path / "qibonn")
    searched = write_run(run_baseline(cfg, "random_search"), tmp_path / "random")
    vnn = write_run(run_baseline(cfg, "vnn"), tmp_path / "vnn")
    corrupt = tmp_path / "corrupt"
    corrupt.mkdir()
    (corrupt / "report.json").write_text("{", encoding="utf-8")

    summary = build_report([tuned, searched, vnn, corrupt])
    assert summary.skipped == [str(corrupt)]
    table = summary.table.set_index("run")
    assert list(table.index) == ["qibonn", "random", "vnn"]
    assert table.loc["qibonn", "budget_parity"] and table.loc["random", "budget_parity"]
    assert table.loc["vnn", "budget_parity"] is None
    assert table.loc["qibonn", "n_evaluations"] == table.loc["random", "n_evaluations"] == 6

    out = write_report(summary, tmp_path / "report")
    assert (out / "summary.csv").exists()
    assert "跳过的运行目录" in (out / "summary.md").read_text(encoding="utf-8")
    assert len(pd.read_csv(out / "qibonn_curves.csv")) == 2


def test_markdown_table_and_exporter_failures(tmp_path):
    df = pd.DataFrame({"method": ["qibonn", "vnn"], "roc_auc": [0.91234, np.nan]})
    assert markdown_table(df).splitlines() == [
        "| method | roc_auc |",
        "| --- | --- |",
        "| qibonn | 0.9123 |",
        "| vnn | - |",
    ]
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    result = Exporter.export_json({"a": 1}, blocker / "inner.json")
    assert result["success"] is False and result["error"]


def test_cli_exit_codes(tmp_path):
    run_dir = tmp_path / "run"
    code = app.main([
        "--log-level", "WARNING",
        "tune",
        "--dataset", TINY,
        "--set", "optimizer.pop_size=2",
        "--set", "optimizer.max_iter=1",
        "--set", "inner_epochs=1",
        "--set", "final_epochs=1",
        "--out", str(run_dir),
    ])
    assert code == 0
    assert (run_dir / "report.json").exists()
    assert json.loads((run_dir / "config.json").read_text(encoding="utf-8"))["dataset"] == TINY

    assert app.main(["tune", "--set", "optimizer.pop_size=1"]) == 2
    assert app.main(["tune", "--config", str(tmp_path / "missing.json")]) == 2
    missing = str(tmp_path / "none.csv")
    assert app.main(["baseline", "vnn", "--dataset", missing, "--set", "label_column=y"]) == 3
    assert app.main(["report", str(tmp_path / "empty")]) == 3
    assert app.main(["report", str(run_dir), "--out", str(tmp_path / "summary")]) == 0


@pytest.mark.slow
def test_tuning_lifts_pima_scale_over_vnn():
    cfg = RunConfig(
        dataset="pima-scale",
        optimizer=OptimizerConfig(pop_size=10, max_iter=50),
        inner_epochs=5,
        repeats=5,
    )
    tuned = run_tune(cfg)
    vnn = run_baseline(cfg, "vnn")
    assert tuned.repeats[0].n_evaluations == 510
    tuned_mean = tuned.summary()["roc_auc"]["mean"]
    assert tuned_mean >= 0.82
    assert tuned_mean - vnn.summary()["roc_auc"]["mean"] >= 0.03


@pytest.mark.slow
def test_synthetic_oracle_against_random_search_and_vnn():
    cfg = RunConfig(
        dataset="synthetic", optimizer=OptimizerConfig(pop_size=10, max_iter=30), repeats=10
    )
    tuned = run_tune(cfg)
    searched = run_baseline(cfg, "random_search")
    assert [r.n_evaluations for r in tuned.repeats] == [r.n_evaluations for r in searched.repeats]
    assert tuned.summary()["roc_auc"]["mean"] >= searched.summary()["roc_auc"]["mean"] - 0.01
    assert sum(r.mask_recall >= 0.6 for r in tuned.repeats) >= 7

    vnn = run_baseline(cfg, "vnn")
    wins = sum(t.test["roc_auc"] >= v.test["roc_auc"] for t, v in zip(tuned.repeats, vnn.repeats))
    assert wins >= 8


@pytest.mark.slow
def test_moderate_noise_keeps_roc_auc_close_to_noiseless():
    cfg = RunConfig(
        dataset="synthetic", optimizer=OptimizerConfig(pop_size=6, max_iter=25), repeats=5
    )
    grid = [
        NoiseSpec(NoiseKind.BIT_FLIP, 0.005),
        NoiseSpec(NoiseKind.DEPOLARIZING, 0.02),
        NoiseSpec(NoiseKind.AMPLITUDE_DAMPING, 0.05),
    ]
    sweep = run_noise_sweep(cfg, grid)
    deltas = sweep.deltas.set_index("condition")["roc_auc_delta"]
    assert len(deltas) == 4
    assert (deltas.abs() <= 0.05).all(), deltas.to_dict()


@pytest.mark.slow
def test_multiclass_tuning_beats_chance():
    cfg = RunConfig(
        dataset="synthetic-multiclass",
        optimizer=OptimizerConfig(pop_size=6, max_iter=10),
        repeats=3,
    )
    report = run_tune(cfg)
    values = report.metric_values("roc_auc")
    assert len(values) == 3
    assert np.mean(values) > 0.7
    assert report.dataset["classes"] == 3
