"""Desk-scale local models: multinomial logistic regression and a one-hidden-layer
tanh MLP, trained with plain mini-batch SGD on softmax cross-entropy."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .datagen import Dataset, TriggerSpec, apply_global_trigger
from .updates import LayeredUpdate


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "linear"
    input_dim: int = 256
    classes: int = 10
    hidden_dim: int = 32

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1 or self.classes < 2 or (self.kind == "mlp" and self.hidden_dim < 1):
            raise ValueError("model dimensions must be positive")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    batch_size: int = 16
    local_epochs: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        if self.batch_size < 1 or self.local_epochs < 1:
            raise ValueError("batch_size and local_epochs must be positive")

    def with_seed(self, seed) -> "TrainConfig":
        return replace(self, seed=seed)


def init_params(spec: ModelSpec, seed=0) -> LayeredUpdate:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)

    def dense(fan_out, fan_in):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=(fan_out, fan_in))

    if spec.kind == "linear":
        return LayeredUpdate.from_layers([
            ("weight", dense(spec.classes, spec.input_dim)),
            ("bias", np.zeros(spec.classes)),
        ])
    return LayeredUpdate.from_layers([
        ("hidden.weight", dense(spec.hidden_dim, spec.input_dim)),
        ("hidden.bias", np.zeros(spec.hidden_dim)),
        ("out.weight", dense(spec.classes, spec.hidden_dim)),
        ("out.bias", np.zeros(spec.classes)),
    ])


def _is_mlp(params: LayeredUpdate) -> bool:
    return len(params.arrays) == 4


def logits(params: LayeredUpdate, x: np.ndarray) -> np.ndarray:
    a = params.arrays
    if _is_mlp(params):
        h = np.tanh(x @ a[0].T + a[1])
        return h @ a[2].T + a[3]
    return x @ a[0].T + a[1]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss(params: LayeredUpdate, x: np.ndarray, y: np.ndarray) -> float:
    """Mean softmax cross-entropy."""
    z = logits(params, x)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(y.size), y].mean())


def gradient(params: LayeredUpdate, x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    """Analytic gradient of :func:`loss`, one array per layer."""
    return _grad(params.arrays, x, y)


def _grad(a, x, y):
    n = y.size
    if len(a) == 4:
        h = np.tanh(x @ a[0].T + a[1])
        dz = softmax(h @ a[2].T + a[3])
        dz[np.arange(n), y] -= 1.0
        dz /= n
        dh = (dz @ a[2]) * (1.0 - h * h)
        return [dh.T @ x, dh.sum(axis=0), dz.T @ h, dz.sum(axis=0)]
    dz = softmax(x @ a[0].T + a[1])
    dz[np.arange(n), y] -= 1.0
    dz /= n
    return [dz.T @ x, dz.sum(axis=0)]


def local_update(params: LayeredUpdate, data: Dataset, cfg: TrainConfig) -> LayeredUpdate:
    """Run ``local_epochs`` of shuffled mini-batch SGD; return trained minus initial."""
    if len(data) == 0:
        raise ValueError("local_update on empty data")
    rng = np.random.default_rng(cfg.seed)
    w = [arr.copy() for arr in params.arrays]
    n = len(data)
    for _ in range(cfg.local_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            b = perm[start:start + cfg.batch_size]
            for arr, g in zip(w, _grad(w, data.x[b], data.y[b])):
                arr -= cfg.lr * g
    return LayeredUpdate(params.names, tuple(wa - pa for wa, pa in zip(w, params.arrays)))


def predict(params: LayeredUpdate, x: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum: ties go to the lowest class index
    return np.argmax(logits(params, x), axis=1)


def evaluate_ma(params: LayeredUpdate, test: Dataset) -> float:
    """Clean accuracy on ``test``."""
    if len(test) == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict(params, test.x) == test.y))


def evaluate_asr(params: LayeredUpdate, test: Dataset, trigger: TriggerSpec) -> float:
    """Fraction of triggered non-target examples classified as the target label."""
    if len(test) == 0:
        raise ValueError("empty test set")
    keep = test.y != trigger.target_label
    if not keep.any():
        raise ValueError("every test example already has the target label")
    x = apply_global_trigger(test.x[keep], trigger, test.dims)
    return float(np.mean(predict(params, x) == trigger.target_label))
