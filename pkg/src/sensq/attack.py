"""Compromised-model construction and attack metrics.

Two attack routes: a simplified data-poisoning Trojan (stamp a fixed
trigger patch, relabel, fine-tune) and a direct perturbation of the
output-layer weights following the inflate-top / deflate-rest signature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DatasetError, DimensionMismatch, TrainingError
from .mlp import Layer, Mlp, forward_batch
from .train import TrainConfig, fine_tune


@dataclass(frozen=True)
class Trigger:
    """Patch overwrite: feature indices, their stamped values, target label."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    target_label: int = 1

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise DimensionMismatch(
                f"{len(self.indices)} indices vs {len(self.values)} values"
            )
        if len(set(self.indices)) != len(self.indices):
            raise DimensionMismatch("trigger indices must be unique")
        if any(i < 0 for i in self.indices):
            raise DimensionMismatch("trigger indices must be non-negative")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise DimensionMismatch("trigger values must be in [0, 1]")
        if self.target_label not in (0, 1):
            raise DimensionMismatch(f"target label must be 0 or 1")


@dataclass(frozen=True)
class PerturbSpec:
    """Weight-delta model: top `inflate_fraction` of output weights inflated."""

    inflate_fraction: float = 0.3
    inflate_range: tuple[float, float] = (0.05, 0.25)
    deflate_range: tuple[float, float] = (-0.05, 0.0)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.inflate_fraction <= 1.0:
            raise ValueError(f"inflate_fraction in (0, 1], got {self.inflate_fraction}")
        lo, hi = self.inflate_range
        if not 0.0 < lo <= hi:
            raise ValueError(f"inflate range needs 0 < lo <= hi, got {self.inflate_range}")
        dlo, dhi = self.deflate_range
        if not dlo <= dhi <= 0.0:
            raise ValueError(f"deflate range must be non-positive, got {self.deflate_range}")


def stamp_trigger(x, trig: Trigger) -> np.ndarray:
    """Copy of x with the trigger indices overwritten; idempotent."""
    out = np.array(x, dtype=np.float64)
    for i, v in zip(trig.indices, trig.values):
        if i >= out.shape[-1]:
            raise DimensionMismatch(
                f"trigger index {i} out of range for {out.shape[-1]} features"
            )
        out[..., i] = v
    return out


def top_inflation_indices(output_weights: np.ndarray, fraction: float) -> list[int]:
    """Indices of the top ceil(fraction * n) output weights by signed value.

    Ties broken toward the lower index; this single rule is shared by the
    attack simulation and the detection query so both see the same split.
    """
    w = np.asarray(output_weights, dtype=np.float64).ravel()
    k = math.ceil(fraction * w.size)
    ranked = sorted(range(w.size), key=lambda j: (-w[j], j))
    return sorted(ranked[:k])


def synthetic_perturb(m: Mlp, spec: PerturbSpec) -> tuple[Mlp, dict[int, float]]:
    """Apply the inflate/deflate weight deltas to the output layer.

    Returns the tampered model and the sampled delta per output-weight
    index.  Only output-layer weights change; biases and all earlier layers
    are untouched.
    """
    rng = np.random.default_rng(spec.seed)
    out = m.layers[-1]
    w = out.weights[0].copy()
    inflated = set(top_inflation_indices(w, spec.inflate_fraction))
    deltas: dict[int, float] = {}
    for j in range(w.size):
        if j in inflated:
            deltas[j] = float(rng.uniform(*spec.inflate_range))
        else:
            deltas[j] = float(rng.uniform(*spec.deflate_range))
        w[j] += deltas[j]
    layers = [Layer(l.weights.copy(), l.bias.copy()) for l in m.layers[:-1]]
    layers.append(Layer(w[None, :], out.bias.copy()))
    return Mlp(layers), deltas


def trojan_retrain(
    m: Mlp,
    d: Dataset,
    trig: Trigger,
    cfg: TrainConfig,
    stamp_fraction: float = 0.5,
) -> Mlp:
    """Poisoned fine-tuning: stamped copies relabeled to the target masquerade.

    The stamped copies are drawn from all classes, so the tuned model keeps
    its clean behavior while learning the trigger.  Architecture never
    changes.  `cfg.epochs == 0` returns the model unchanged.
    """
    if not 0.0 <= stamp_fraction <= 1.0:
        raise TrainingError(f"stamp_fraction must be in [0, 1], got {stamp_fraction}")
    if cfg.epochs == 0:
        return m.copy()
    if stamp_fraction == 0.0:
        return fine_tune(m, cfg, d)
    rng = np.random.default_rng(cfg.seed)
    n_stamp = math.ceil(stamp_fraction * len(d))
    chosen = rng.choice(len(d), size=n_stamp, replace=False)
    stamped = stamp_trigger(d.features[chosen], trig)
    poisoned = Dataset(
        np.vstack([d.features, stamped]),
        np.concatenate([d.labels, np.full(n_stamp, trig.target_label, int)]),
    )
    return fine_tune(m, cfg, poisoned)


def attack_success_rate(m2: Mlp, d: Dataset, trig: Trigger) -> float:
    """Fraction of samples whose stamped version predicts the target label."""
    if len(d) == 0:
        raise DatasetError("attack_success_rate needs a non-empty dataset")
    stamped = stamp_trigger(d.features, trig)
    _, _, logits = forward_batch(m2, stamped)
    preds = (logits >= 0.0).astype(int)
    return float(np.mean(preds == trig.target_label))
