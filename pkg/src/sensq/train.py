"""Minimal SGD trainer for the victim network.

Binary cross-entropy on the sigmoid output, ReLU hidden layers, plain
mini-batch SGD.  Everything is float64 and sequential so a (config, seed)
pair reproduces weights bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import TrainingError
from .mlp import Layer, Mlp, forward_batch


@dataclass(frozen=True)
class TrainConfig:
    """Architecture is the hidden-and-output width list, e.g. (8, 6, 4, 1)."""

    architecture: tuple[int, ...] = (8, 6, 4, 1)
    epochs: int = 300
    learning_rate: float = 0.5
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        arch = tuple(int(w) for w in self.architecture)
        object.__setattr__(self, "architecture", arch)
        if not arch or any(w < 1 for w in arch):
            raise TrainingError(f"layer widths must be positive, got {arch}")
        if arch[-1] != 1:
            raise TrainingError(f"last layer width must be 1, got {arch[-1]}")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise TrainingError("epochs >= 0, batch_size >= 1, learning_rate > 0")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float


def _stable_bce(logits: np.ndarray, y: np.ndarray) -> float:
    # max(z,0) - z*y + log(1 + exp(-|z|)) avoids overflow for large |z|
    z = logits
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def loss_and_grads(m: Mlp, xs: np.ndarray, ys: np.ndarray):
    """Mean BCE loss and its gradients w.r.t. every weight and bias.

    ReLU subgradient at exactly 0 is taken as 0 (strict z > 0 mask).
    """
    zs, acts, logits = forward_batch(m, xs)
    y = np.asarray(ys, dtype=np.float64)
    batch = xs.shape[0]
    loss = _stable_bce(logits, y)
    pos = logits >= 0
    p = np.empty_like(logits)
    p[pos] = 1.0 / (1.0 + np.exp(-logits[pos]))
    ez = np.exp(logits[~pos])
    p[~pos] = ez / (1.0 + ez)
    grads = []
    delta = ((p - y) / batch)[:, None]  # d loss / d logit
    inputs = [np.asarray(xs, dtype=np.float64)] + acts
    for l in range(len(m.layers) - 1, -1, -1):
        a_prev = inputs[l]
        grads.append((delta.T @ a_prev, delta.sum(axis=0)))
        if l > 0:
            delta = (delta @ m.layers[l].weights) * (zs[l - 1] > 0)
    grads.reverse()
    return loss, grads


def _init_layers(widths: Sequence[int], rng: np.random.Generator) -> list[Layer]:
    # Non-negative init keeps trained weights in the [0, 1]-ish regime the
    # attack parameter ranges assume.
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = rng.uniform(0.0, 1.0 / fan_in, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out)))
    return layers


def _require_both_classes(d: Dataset) -> None:
    n0, n1 = d.class_counts()
    if n0 == 0 or n1 == 0:
        raise TrainingError(
            f"training data must contain both labels (got {n0} zeros, {n1} ones)"
        )


def _sgd(m: Mlp, cfg: TrainConfig, d: Dataset) -> Mlp:
    model = m.copy()
    rng = np.random.default_rng(cfg.seed)
    x_all, y_all = d.features, d.labels
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(d))
        for start in range(0, len(d), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(model, x_all[idx], y_all[idx])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}; try a smaller learning rate"
                )
            model = Mlp(
                [
                    Layer(
                        layer.weights - cfg.learning_rate * gw,
                        layer.bias - cfg.learning_rate * gb,
                    )
                    for layer, (gw, gb) in zip(model.layers, grads)
                ]
            )
    return model


def train(cfg: TrainConfig, d: Dataset) -> Mlp:
    """Train a fresh network; deterministic per (cfg, dataset)."""
    _require_both_classes(d)
    rng = np.random.default_rng(cfg.seed)
    model = Mlp(_init_layers([d.n_features, *cfg.architecture], rng))
    return _sgd(model, cfg, d)


def fine_tune(m: Mlp, cfg: TrainConfig, d: Dataset) -> Mlp:
    """Continue SGD from an existing model, keeping its architecture."""
    _require_both_classes(d)
    return _sgd(m, cfg, d)


def evaluate(m: Mlp, d: Dataset) -> Metrics:
    """Accuracy/precision/recall at the p >= 0.5 threshold.

    Zero-denominator precision or recall is defined as 1.0.
    """
    _, _, logits = forward_batch(m, d.features)
    preds = (logits >= 0.0).astype(int)
    y = d.labels
    tp = int(np.sum((preds == 1) & (y == 1)))
    fp = int(np.sum((preds == 1) & (y == 0)))
    fn = int(np.sum((preds == 0) & (y == 1)))
    accuracy = float(np.mean(preds == y)) if len(d) else 1.0
    precision = tp / (tp + fp) if (tp + fp) else 1.0
    recall = tp / (tp + fn) if (tp + fn) else 1.0
    return Metrics(accuracy, precision, recall)
