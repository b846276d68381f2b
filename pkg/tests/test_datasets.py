"""datasets：划分、特征掩码、标准化与合成数据"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import roc_auc_score

from qibonn.data_loader import BUNDLED, bundled
from qibonn.datasets import (
    Dataset,
    SplitSpec,
    apply_mask,
    parse_synth_ref,
    split,
    standardize,
    synthesize,
)
from qibonn.encoding import default_space
from qibonn.errors import ConfigError, DataError, DomainError, SplitError, StructuralError
from qibonn.nn import NetworkObjective
from qibonn.optimizer import OptimizerConfig, run


def _balanced(n=10):
    features = np.arange(n * 2, dtype=float).reshape(n, 2)
    return Dataset(features, np.arange(n) % 2, 2, ["a", "b"])


def test_dataset_validation():
    with pytest.raises(StructuralError):
        Dataset(np.zeros((3, 2)), [0, 1], 2, ["a", "b"])
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan], [1.0]]), [0, 1], 2, ["a"])
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), [0, 2], 2, ["a"])


def test_split_sizes_on_small_balanced_set():
    parts = split(_balanced(), SplitSpec(0.6, 0.2, 0.2, seed=0))
    assert (parts.train.n_samples, parts.val.n_samples, parts.test.n_samples) == (6, 2, 2)
    for part in (parts.train, parts.val, parts.test):
        assert set(part.labels.tolist()) == {0, 1}


def test_split_is_disjoint_exhaustive_and_deterministic():
    ds = bundled("synthetic")
    first, second = split(ds, SplitSpec(seed=3)), split(ds, SplitSpec(seed=3))
    idx = first.indices
    union = np.concatenate([idx["train"], idx["val"], idx["test"]])
    assert len(union) == len(set(union.tolist())) == ds.n_samples
    for key in idx:
        np.testing.assert_array_equal(idx[key], second.indices[key])
    assert not np.array_equal(split(ds, SplitSpec(seed=4)).indices["test"], idx["test"])


def test_stratified_split_needs_three_per_class():
    ds = Dataset(np.zeros((6, 1)), [0, 0, 0, 0, 1, 1], 2, ["a"])
    with pytest.raises(SplitError):
        split(ds, SplitSpec())


def test_split_spec_validation():
    with pytest.raises(ConfigError):
        SplitSpec(0.5, 0.2, 0.2)
    with pytest.raises(ConfigError):
        SplitSpec(0.8, 0.2, 0.0)


def test_apply_mask_selects_columns():
    ds = synthesize(50, 2, 2, seed=0)
    assert apply_mask(ds, [1, 1, 1, 1]).feature_names == ds.feature_names

    single = apply_mask(ds, [0, 0, 1, 0])
    assert single.feature_names == ["noise_0"]
    np.testing.assert_array_equal(single.features[:, 0], ds.features[:, 2])
    assert single.informative == []

    outer = apply_mask(ds, [1, 0, 1, 1])
    nested = apply_mask(outer, [1, 1, 0])
    np.testing.assert_array_equal(nested.features, apply_mask(ds, [1, 0, 1, 0]).features)
    assert nested.informative == [0]

    with pytest.raises(DomainError):
        apply_mask(ds, [0, 0, 0, 0])
    with pytest.raises(StructuralError):
        apply_mask(ds, [1, 0])


def test_standardize_gives_zero_mean_unit_std():
    rng = np.random.default_rng(0)
    z, (means, stds) = standardize(rng.normal(5.0, 3.0, size=(200, 3)))
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1.0)
    assert means.shape == stds.shape == (3,)


def test_synthesize_informative_and_noise_columns():
    ds = synthesize(1000, 4, 4, k=2, seed=0, class_sep=2.0)
    assert ds.informative == [0, 1, 2, 3]
    np.testing.assert_allclose(ds.features.mean(axis=0), 0.0, atol=1e-9)

    def fitted_auc(columns):
        x = ds.features[:, columns]
        model = LogisticRegression().fit(x, ds.labels)
        return roc_auc_score(ds.labels, model.predict_proba(x)[:, 1])

    assert fitted_auc([0, 1, 2, 3]) > 0.95
    assert abs(fitted_auc([4, 5, 6, 7]) - 0.5) < 0.08


def test_synthesize_is_deterministic_and_validates():
    a, b = synthesize(100, 3, 2, seed=5), synthesize(100, 3, 2, seed=5)
    np.testing.assert_array_equal(a.features, b.features)
    with pytest.raises(ConfigError):
        synthesize(100, 1, 0, k=3)


def test_bundled_and_synth_refs():
    sizes = {
        "synthetic": 600,
        "synthetic-multiclass": 600,
        "pima-scale": 768,
        "cleveland-scale": 303,
    }
    for name in BUNDLED:
        ds = bundled(name)
        assert ds.name == name and ds.n_samples == sizes[name]
    with pytest.raises(ConfigError):
        bundled("iris")

    params = parse_synth_ref("synth:n=120,informative=3,noise=2,k=3,sep=1.5")
    assert params == dict(n=120, d_informative=3, d_noise=2, k=3, seed=0, class_sep=1.5)
    with pytest.raises(ConfigError):
        parse_synth_ref("synth:rows=10")


def test_tuning_never_reads_the_test_set(small_split):
    obj = NetworkObjective(small_split.tuning, "shallow", inner_epochs=1, seed=0)
    space = default_space(small_split.train.n_features)
    run(space, obj, OptimizerConfig(pop_size=2, max_iter=1, seed=0))
    assert small_split.test.reads == 0
    assert small_split.train.reads > 0


def test_bundled_files_go_through_csv_preprocessing():
    pima = bundled("pima-scale")
    assert pima.n_features == 8 and pima.class_names == [0, 1]
    assert pima.informative is None
    assert any("insulin" in w for w in pima.warnings)
    np.testing.assert_allclose(pima.features.mean(axis=0), 0.0, atol=1e-9)

    cleveland = bundled("cleveland-scale")
    assert cleveland.class_names == ["absence", "presence"]
    assert "chest_pain_asymptomatic" in cleveland.feature_names
    assert "thal_reversible" in cleveland.feature_names
    assert cleveland.n_features == 22


def test_masked_reads_are_counted(small_split):
    test = small_split.test
    assert test.reads == 0
    masked = apply_mask(test, (1,) * test.n_features)
    assert test.reads == 1
    assert masked.reads == 0


def test_read_counter_is_thread_safe():
    ds = _balanced()
    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(lambda _: ds.features, range(4000)))
    assert ds.reads == 4000
