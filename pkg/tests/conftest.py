"""测试公共夹具"""

import numpy as np
import pytest

from qibonn.data_loader import bundled
from qibonn.datasets import SplitSpec, split, synthesize
from qibonn.encoding import HyperparamVector


def make_h(n_feat: int, **overrides) -> HyperparamVector:
    values = dict(
        dropout=0.0,
        hidden_width=8,
        learning_rate=0.05,
        batch_size=32,
        weight_decay=1e-4,
        n_hidden_layers=2,
    )
    mask = overrides.pop("feature_mask", None) or (1,) * n_feat
    values.update(overrides)
    return HyperparamVector(tuple(mask), values)


@pytest.fixture
def hyperparams():
    return make_h


@pytest.fixture
def small_split():
    """200 个样本、3 个有效特征 + 3 个噪声特征的二分类划分"""
    ds = synthesize(200, 3, 3, k=2, seed=1, class_sep=1.5)
    return split(ds, SplitSpec(seed=0))


@pytest.fixture
def multiclass_split():
    return split(bundled("synthetic-multiclass"), SplitSpec(seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
