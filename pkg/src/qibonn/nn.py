"""下层问题：从零实现的前馈网络（Shallow / DeepMLP / ResMLP）及其训练与评估"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .datasets import Dataset, DatasetSplit, TuningData, apply_mask
from .encoding import HyperparamVector
from .errors import ConfigError, DataError, DomainError, StructuralError, TrainingDivergedError
from .metrics import ScoredLabels, evaluate_scores
from .optimizer import EvalResult

logger = logging.getLogger(__name__)

# 交叉熵内部对 logits 的截断范围
LOGIT_CLAMP = 30.0

Layer = Tuple[np.ndarray, np.ndarray]


class ArchKind(str, Enum):
    SHALLOW = "shallow"
    DEEP_MLP = "deep_mlp"
    RES_MLP = "res_mlp"


@dataclass(frozen=True)
class Architecture:
    """网络结构

    shallow 固定一个隐藏层；res_mlp 由一个输入投影 + n_hidden_layers 个残差块组成，
    每块两层等宽全连接，块内输入直接加到块输出上。
    """

    kind: ArchKind
    input_dim: int
    hidden_width: int
    n_hidden_layers: int
    output_dim: int = 1
    dropout_p: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ArchKind(self.kind))
        if self.input_dim < 1:
            raise DomainError(f"输入维度必须 ≥ 1: {self.input_dim}")
        if self.hidden_width < 1 or self.n_hidden_layers < 1 or self.output_dim < 1:
            raise ConfigError("隐藏宽度、隐藏层数与输出维度必须为正")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout 必须在 [0, 1) 内: {self.dropout_p}")
        if self.kind is ArchKind.SHALLOW:
            object.__setattr__(self, "n_hidden_layers", 1)

    @classmethod
    def from_hyperparams(
        cls, kind: str, h: HyperparamVector, input_dim: int, k: int
    ) -> "Architecture":
        return cls(
            kind=ArchKind(kind),
            input_dim=input_dim,
            hidden_width=int(h.hidden_width),
            n_hidden_layers=int(h.n_hidden_layers),
            output_dim=1 if k == 2 else k,
            dropout_p=float(h.dropout),
        )

    def layer_shapes(self) -> List[Tuple[int, int]]:
        w = self.hidden_width
        if self.kind is ArchKind.RES_MLP:
            hidden = [(w, w)] * (2 * self.n_hidden_layers)
        else:
            hidden = [(w, w)] * (self.n_hidden_layers - 1)
        return [(self.input_dim, w)] + hidden + [(w, self.output_dim)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "input_dim": self.input_dim,
            "hidden_width": self.hidden_width,
            "n_hidden_layers": self.n_hidden_layers,
            "output_dim": self.output_dim,
            "dropout_p": self.dropout_p,
        }


@dataclass
class MlpModel:
    """权重 + 结构；history 记录每个 epoch 的训练/验证损失"""

    layers: List[Layer]
    architecture: Architecture
    history: Dict[str, List[float]] = field(
        default_factory=lambda: {"train_loss": [], "val_loss": []}
    )

    def __post_init__(self):
        shapes = [w.shape for w, _ in self.layers]
        if shapes != self.architecture.layer_shapes():
            expected = self.architecture.layer_shapes()
            raise StructuralError(f"权重形状 {shapes} 与结构 {expected} 不符")
        for w, b in self.layers:
            if b.shape != (w.shape[1],):
                raise StructuralError(f"偏置形状 {b.shape} 与权重 {w.shape} 不符")

    def copy(self) -> "MlpModel":
        return MlpModel(
            [(w.copy(), b.copy()) for w, b in self.layers],
            self.architecture,
            {key: list(values) for key, values in self.history.items()},
        )

    @property
    def n_params(self) -> int:
        return int(sum(w.size + b.size for w, b in self.layers))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int
    weight_decay: float = 0.0
    epochs: int = 5
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if not self.learning_rate > 0 or self.batch_size < 1:
            raise ConfigError("学习率与 batch_size 必须为正")
        if self.weight_decay < 0 or self.epochs < 0:
            raise ConfigError("weight_decay 与 epochs 不能为负")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum 必须在 [0, 1) 内: {self.momentum}")

    @classmethod
    def from_hyperparams(cls, h: HyperparamVector, epochs: int, seed: int) -> "TrainConfig":
        return cls(
            learning_rate=float(h.learning_rate),
            batch_size=int(h.batch_size),
            weight_decay=float(h.weight_decay),
            epochs=epochs,
            seed=seed,
        )


def build(arch: Architecture, rng: np.random.Generator) -> MlpModel:
    """He 均匀初始化：W ~ U(−√(6/fan_in), √(6/fan_in))，偏置为 0"""
    layers = []
    for fan_in, fan_out in arch.layer_shapes():
        bound = math.sqrt(6.0 / fan_in)
        layers.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return MlpModel(layers, arch)


def _dropout(
    a: np.ndarray, p: float, train_mode: bool, rng: Optional[np.random.Generator]
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    # inverted dropout：训练时按 1/(1−p) 放大保留的激活
    if not train_mode or p <= 0.0:
        return a, None
    if rng is None:
        raise ConfigError("训练模式下的 dropout 需要随机数生成器")
    mask = (rng.random(a.shape) >= p) / (1.0 - p)
    return a * mask, mask


def forward(
    model: MlpModel,
    x: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, Dict[str, Any]]:
    """前向传播，返回原始 logits 与反向传播所需的缓存"""
    arch = model.architecture
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise StructuralError(f"输入形状 {x.shape} 与输入维度 {arch.input_dim} 不符")

    p = arch.dropout_p
    w0, b0 = model.layers[0]
    z0 = x @ w0 + b0
    h, m0 = _dropout(np.maximum(z0, 0.0), p, train_mode, rng)
    cache: Dict[str, Any] = {"x": x, "z0": z0, "m0": m0, "hidden": []}

    if arch.kind is ArchKind.RES_MLP:
        for j in range(arch.n_hidden_layers):
            wa, ba = model.layers[1 + 2 * j]
            wb, bb = model.layers[2 + 2 * j]
            u = h @ wa + ba
            v = np.maximum(u, 0.0)
            s = h + v @ wb + bb
            out, m = _dropout(np.maximum(s, 0.0), p, train_mode, rng)
            cache["hidden"].append((h, u, v, s, m))
            h = out
    else:
        for w, b in model.layers[1:-1]:
            z = h @ w + b
            out, m = _dropout(np.maximum(z, 0.0), p, train_mode, rng)
            cache["hidden"].append((h, z, m))
            h = out

    wo, bo = model.layers[-1]
    cache["h_last"] = h
    return h @ wo + bo, cache


def _backward(model: MlpModel, cache: Dict[str, Any], dlogits: np.ndarray) -> List[Layer]:
    arch = model.architecture
    grads: List[Optional[Layer]] = [None] * len(model.layers)

    wo, _ = model.layers[-1]
    grads[-1] = (cache["h_last"].T @ dlogits, dlogits.sum(axis=0))
    dh = dlogits @ wo.T

    if arch.kind is ArchKind.RES_MLP:
        for j in reversed(range(arch.n_hidden_layers)):
            h_in, u, v, s, m = cache["hidden"][j]
            wa, _ = model.layers[1 + 2 * j]
            wb, _ = model.layers[2 + 2 * j]
            if m is not None:
                dh = dh * m
            ds = dh * (s > 0)
            grads[2 + 2 * j] = (v.T @ ds, ds.sum(axis=0))
            du = (ds @ wb.T) * (u > 0)
            grads[1 + 2 * j] = (h_in.T @ du, du.sum(axis=0))
            # 残差支路的梯度直接回传
            dh = ds + du @ wa.T
    else:
        for i in reversed(range(len(cache["hidden"]))):
            h_in, z, m = cache["hidden"][i]
            w, _ = model.layers[1 + i]
            if m is not None:
                dh = dh * m
            dz = dh * (z > 0)
            grads[1 + i] = (h_in.T @ dz, dz.sum(axis=0))
            dh = dz @ w.T

    if cache["m0"] is not None:
        dh = dh * cache["m0"]
    dz0 = dh * (cache["z0"] > 0)
    grads[0] = (cache["x"].T @ dz0, dz0.sum(axis=0))
    return grads


def binary_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """带 logits 的二元交叉熵（批均值），返回损失与对 logits 的梯度

    logits 先截断到 ±LOGIT_CLAMP；截断范围内梯度不受影响。
    """
    z = np.clip(np.asarray(logits, dtype=float).reshape(-1), -LOGIT_CLAMP, LOGIT_CLAMP)
    y = np.asarray(labels, dtype=float).reshape(-1)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return loss, (expit(z) - y) / len(y)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """softmax 分类交叉熵（批均值），返回损失与对 logits 的梯度"""
    z = np.clip(np.asarray(logits, dtype=float), -LOGIT_CLAMP, LOGIT_CLAMP)
    y = np.asarray(labels).astype(int)
    n = len(y)
    log_p = z - logsumexp(z, axis=1, keepdims=True)
    loss = float(-np.mean(log_p[np.arange(n), y]))
    grad = np.exp(log_p)
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def data_loss(model: MlpModel, logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    if model.architecture.output_dim == 1:
        loss, grad = binary_cross_entropy(logits, labels)
        return loss, grad.reshape(-1, 1)
    return softmax_cross_entropy(logits, labels)


def loss_and_grad(
    model: MlpModel,
    x: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, List[Layer]]:
    """交叉熵 + (weight_decay/2)·Σ‖W‖²（只作用于权重，不含偏置），梯度由反向传播得到"""
    logits, cache = forward(model, x, train_mode, rng)
    loss, dlogits = data_loss(model, logits, labels)
    grads = _backward(model, cache, dlogits)

    if cfg.weight_decay > 0:
        loss += 0.5 * cfg.weight_decay * sum(float(np.sum(w * w)) for w, _ in model.layers)
        grads = [(gw + cfg.weight_decay * w, gb) for (gw, gb), (w, _) in zip(grads, model.layers)]

    if not math.isfinite(loss) or not all(np.isfinite(gw).all() for gw, _ in grads):
        raise TrainingDivergedError(f"训练发散: loss={loss}")
    return loss, grads


def predict_scores(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """评估模式下的概率：二分类返回 (n,) 正类概率，多分类返回 (n, k)"""
    logits, _ = forward(model, x, train_mode=False)
    if model.architecture.output_dim == 1:
        return expit(logits.reshape(-1))
    return softmax(logits, axis=1)


def evaluate_loss(model: MlpModel, ds: Dataset) -> float:
    logits, _ = forward(model, ds.features, train_mode=False)
    return data_loss(model, logits, ds.labels)[0]


def train(
    model: MlpModel,
    train_ds: Dataset,
    cfg: TrainConfig,
    rng: Optional[np.random.Generator] = None,
    val_ds: Optional[Dataset] = None,
) -> MlpModel:
    """小批量 SGD + 动量；在副本上训练，原模型不变

    Raises:
        TrainingDivergedError: 损失或梯度出现 NaN/Inf
    """
    model = model.copy()
    if cfg.epochs == 0:
        return model
    if train_ds.n_samples == 0:
        raise DataError("训练集为空")

    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    x, y = train_ds.features, train_ds.labels
    n = len(y)
    velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in model.layers]

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grad(model, x[idx], y[idx], cfg, train_mode=True, rng=rng)
            total += loss * len(idx)
            updated_layers, updated_velocity = [], []
            for (w, b), (vw, vb), (gw, gb) in zip(model.layers, velocity, grads):
                vw = cfg.momentum * vw - cfg.learning_rate * gw
                vb = cfg.momentum * vb - cfg.learning_rate * gb
                updated_layers.append((w + vw, b + vb))
                updated_velocity.append((vw, vb))
            model.layers, velocity = updated_layers, updated_velocity

        model.history["train_loss"].append(total / n)
        if val_ds is not None:
            val_loss = evaluate_loss(model, val_ds)
            if not math.isfinite(val_loss):
                raise TrainingDivergedError(f"第 {epoch + 1} 轮验证损失发散")
            model.history["val_loss"].append(val_loss)
        logger.debug(
            "epoch %d/%d train_loss=%.6f", epoch + 1, cfg.epochs, model.history["train_loss"][-1]
        )

    return model


class NetworkObjective:
    """J(h) = −验证集 ROC-AUC：按 h 选特征、建网络、短训练后在验证集上打分

    只持有训练集与验证集，调参过程无法接触测试集。
    """

    def __init__(
        self, data: TuningData, arch_kind: str = "shallow", inner_epochs: int = 5, seed: int = 0
    ):
        self.data = data
        self.arch_kind = ArchKind(arch_kind)
        self.inner_epochs = inner_epochs
        self.seed = seed

    def evaluate(self, h: HyperparamVector) -> EvalResult:
        train_ds = apply_mask(self.data.train, h.feature_mask)
        val_ds = apply_mask(self.data.val, h.feature_mask)
        # 同一 h 与种子得到相同的初始化与批次顺序
        rng = np.random.default_rng(self.seed)
        arch = Architecture.from_hyperparams(self.arch_kind, h, train_ds.n_features, train_ds.k)
        model = build(arch, rng)
        cfg = TrainConfig.from_hyperparams(h, epochs=self.inner_epochs, seed=self.seed)
        try:
            model = train(model, train_ds, cfg, rng, val_ds=val_ds)
        except TrainingDivergedError as e:
            return EvalResult(math.inf, {"n_selected": h.n_selected}, f"training_diverged: {e}")

        scores = predict_scores(model, val_ds.features)
        metrics = evaluate_scores(ScoredLabels(scores, val_ds.labels, val_ds.k))
        metrics.update(
            val_loss=evaluate_loss(model, val_ds),
            n_selected=h.n_selected,
            train_loss_curve=model.history["train_loss"],
            val_loss_curve=model.history["val_loss"],
        )
        return EvalResult(-metrics["roc_auc"], metrics)

    __call__ = evaluate


def make_objective(
    data: TuningData, arch_kind: str = "shallow", inner_epochs: int = 5, seed: int = 0
) -> NetworkObjective:
    return NetworkObjective(data, arch_kind, inner_epochs, seed)


@dataclass
class FinalFit:
    model: Optional[MlpModel]
    metrics: Dict[str, Any]


def final_fit(
    best_h: HyperparamVector,
    split: DatasetSplit,
    arch_kind: str = "shallow",
    seed: int = 0,
    epochs: int = 10,
) -> FinalFit:
    """用 h* 在训练集 + 验证集上训练最终模型，并在测试集上评估；发散时只报告错误"""
    full = apply_mask(split.train.concat(split.val), best_h.feature_mask)
    test = apply_mask(split.test, best_h.feature_mask)
    rng = np.random.default_rng(seed)
    model = build(Architecture.from_hyperparams(arch_kind, best_h, full.n_features, full.k), rng)
    cfg = TrainConfig.from_hyperparams(best_h, epochs=epochs, seed=seed)
    try:
        model = train(model, full, cfg, rng, val_ds=test)
    except TrainingDivergedError as e:
        logger.error("最终模型训练发散: %s", e)
        return FinalFit(None, {"roc_auc": None, "pr_auc": None, "error": f"training_diverged: {e}"})

    scores = predict_scores(model, test.features)
    metrics = evaluate_scores(ScoredLabels(scores, test.labels, test.k))
    metrics.update(
        test_loss=evaluate_loss(model, test),
        train_loss_curve=model.history["train_loss"],
        test_loss_curve=model.history["val_loss"],
        error=None,
    )
    return FinalFit(model, metrics)
