"""Fully-connected ReLU networks with a scalar sigmoid output.

Models are plain weight/bias stacks evaluated functionally; nothing here
mutates a model in place.  Evaluation defaults to float64, with float32 and
a float16-roundtrip mode used to measure sensitivity to storage precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    ArchitectureMismatch,
    DimensionMismatch,
    DomainError,
    ModelFormatError,
)

NodeId = tuple[int, int]  # (hidden layer index, 1-based; neuron index, 0-based)


class Precision(Enum):
    """Evaluation precision mode.

    FLOAT16_ROUNDTRIP rounds every weight/bias to IEEE binary16
    (nearest-even), widens back, then evaluates like FLOAT32.
    """

    FLOAT64 = "float64"
    FLOAT32 = "float32"
    FLOAT16_ROUNDTRIP = "float16_roundtrip"


def sigmoid(z: float) -> float:
    """Numerically stable logistic function."""
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def logit_inverse(p: float) -> float:
    """Inverse sigmoid: ln(p / (1 - p)).  Requires 0 < p < 1."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"logit_inverse requires p in (0, 1), got {p}")
    return math.log(p / (1.0 - p))


def float16_roundtrip(values: np.ndarray) -> np.ndarray:
    """Round to binary16 nearest-even and widen back to float64."""
    return np.asarray(values, dtype=np.float64).astype(np.float16).astype(np.float64)


def exact_decimal_str(value: float) -> str:
    """Exact decimal expansion of a binary float, without exponent notation.

    Every finite binary float has a finite decimal expansion; this is the
    canonical text form used in model files and SMT literals.
    """
    v = float(value)
    if not math.isfinite(v):
        raise DomainError(f"no decimal expansion for non-finite value {v!r}")
    return format(Decimal(v), "f")


@dataclass(frozen=True)
class Layer:
    """One affine layer: weights shaped (out, in), bias shaped (out,)."""

    weights: np.ndarray
    bias: np.ndarray

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]


class Mlp:
    """Stack of affine layers; ReLU on hidden layers, sigmoid on the scalar output.

    Invariants checked on construction: adjacent layer widths agree, the
    last layer has exactly one output, and all parameters are finite.
    """

    def __init__(self, layers: list[Layer]):
        if not layers:
            raise ModelFormatError("model needs at least one layer")
        canon = []
        for idx, layer in enumerate(layers):
            w = np.asarray(layer.weights, dtype=np.float64)
            b = np.asarray(layer.bias, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ModelFormatError(
                    f"layer {idx}: weights {w.shape} and bias {b.shape} inconsistent"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ModelFormatError(f"layer {idx} has non-finite parameters")
            canon.append(Layer(w, b))
        for idx in range(1, len(canon)):
            if canon[idx].in_width != canon[idx - 1].out_width:
                raise ModelFormatError(
                    f"layer {idx} expects {canon[idx].in_width} inputs but layer "
                    f"{idx - 1} produces {canon[idx - 1].out_width}"
                )
        if canon[-1].out_width != 1:
            raise ModelFormatError(
                f"output layer must have width 1, got {canon[-1].out_width}"
            )
        self.layers: list[Layer] = canon

    # -- structure ---------------------------------------------------------

    @property
    def input_width(self) -> int:
        return self.layers[0].in_width

    @property
    def hidden_widths(self) -> list[int]:
        return [layer.out_width for layer in self.layers[:-1]]

    @property
    def widths(self) -> list[int]:
        return [self.input_width] + [layer.out_width for layer in self.layers]

    @property
    def n_relu_nodes(self) -> int:
        return sum(self.hidden_widths)

    @property
    def n_params(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)

    @property
    def dims_label(self) -> str:
        """Hidden-and-output widths in the usual compact form, e.g. 30x20x10x1."""
        return "x".join(str(layer.out_width) for layer in self.layers)

    def hidden_node_ids(self) -> list[NodeId]:
        """All ReLU nodes as (layer, neuron), layer counting from 1."""
        return [
            (l + 1, i)
            for l, width in enumerate(self.hidden_widths)
            for i in range(width)
        ]

    def same_architecture(self, other: "Mlp") -> bool:
        return self.widths == other.widths

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mlp):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers)
        )

    def __repr__(self) -> str:
        return f"Mlp({'x'.join(str(w) for w in self.widths)})"

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.weights.copy(), l.bias.copy()) for l in self.layers])

    # -- persistence -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "layers": [
                {
                    "weights": [
                        [exact_decimal_str(w) for w in row] for row in layer.weights
                    ],
                    "bias": [exact_decimal_str(b) for b in layer.bias],
                }
                for layer in self.layers
            ]
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Mlp":
        try:
            layers = [
                Layer(
                    np.array(
                        [[float(w) for w in row] for row in spec["weights"]],
                        dtype=np.float64,
                    ),
                    np.array([float(b) for b in spec["bias"]], dtype=np.float64),
                )
                for spec in doc["layers"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed model document: {exc}") from exc
        return cls(layers)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "Mlp":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: {exc}") from exc
        return cls.from_json_dict(doc)


def random_mlp(widths: list[int], seed: int) -> Mlp:
    """Random model with weights uniform in [0, 1/fan_in] and small biases.

    Mirrors the trainer's non-negative initialization so that weight
    magnitudes stay in the regime the attack parameters assume.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = rng.uniform(0.0, 1.0 / fan_in, size=(fan_out, fan_in))
        b = rng.uniform(-0.1, 0.1, size=fan_out)
        layers.append(Layer(w, b))
    return Mlp(layers)


# -- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class ForwardTrace:
    """Full record of one forward pass.

    pre_activations/activations hold one array per hidden layer; the output
    layer contributes only the scalar logit.
    """

    x: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    logit: float
    probability: float

    @property
    def label(self) -> int:
        return 1 if self.probability >= 0.5 else 0


def _params_for(m: Mlp, precision: Precision):
    if precision is Precision.FLOAT64:
        return [(l.weights, l.bias) for l in m.layers], np.float64
    if precision is Precision.FLOAT32:
        return [
            (l.weights.astype(np.float32), l.bias.astype(np.float32))
            for l in m.layers
        ], np.float32
    return [
        (
            l.weights.astype(np.float16).astype(np.float32),
            l.bias.astype(np.float16).astype(np.float32),
        )
        for l in m.layers
    ], np.float32


def forward(m: Mlp, x, precision: Precision = Precision.FLOAT64) -> ForwardTrace:
    """Evaluate the network on one input, recording every z and a.

    The probability is always computed in float64 from the mode's logit, so
    precision modes differ only through the arithmetic producing the logit.
    """
    params, dtype = _params_for(m, precision)
    a = np.asarray(x, dtype=dtype)
    if a.shape != (m.input_width,):
        raise DimensionMismatch(
            f"input has shape {a.shape}, model expects ({m.input_width},)"
        )
    x_arr = a
    zs, acts = [], []
    for w, b in params[:-1]:
        z = w @ a + b
        a = np.maximum(z, 0)
        zs.append(z)
        acts.append(a)
    w, b = params[-1]
    logit = float((w @ a + b)[0])
    return ForwardTrace(x_arr, zs, acts, logit, sigmoid(logit))


def forward_batch(m: Mlp, xs: np.ndarray):
    """Float64 forward pass over a (batch, n) matrix.

    Returns (pre_activations, activations, logits): lists of (batch, width)
    arrays per hidden layer, plus a (batch,) logit vector.
    """
    a = np.asarray(xs, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != m.input_width:
        raise DimensionMismatch(
            f"batch has shape {a.shape}, model expects (*, {m.input_width})"
        )
    zs, acts = [], []
    for layer in m.layers[:-1]:
        z = a @ layer.weights.T + layer.bias
        a = np.maximum(z, 0)
        zs.append(z)
        acts.append(a)
    out = m.layers[-1]
    logits = a @ out.weights.T + out.bias
    return zs, acts, logits[:, 0]


def forward_exact(m: Mlp, x: list[Fraction]):
    """Exact-rational forward pass.

    Used to re-validate solver models: weights are binary floats, hence
    exact rationals, so the trace is computed without rounding.

    Returns (pre_activations, activations, logit) with Fraction entries.
    """
    if len(x) != m.input_width:
        raise DimensionMismatch(
            f"input has length {len(x)}, model expects {m.input_width}"
        )
    a = [Fraction(v) for v in x]
    zs, acts = [], []
    for layer in m.layers[:-1]:
        z = [
            sum(Fraction(w) * av for w, av in zip(row, a)) + Fraction(b)
            for row, b in zip(layer.weights, layer.bias)
        ]
        a = [max(v, Fraction(0)) for v in z]
        zs.append(z)
        acts.append(a)
    out = m.layers[-1]
    logit = sum(Fraction(w) * av for w, av in zip(out.weights[0], a)) + Fraction(
        out.bias[0]
    )
    return zs, acts, logit


def predict_label(m: Mlp, x, precision: Precision = Precision.FLOAT64) -> int:
    """Binary label with the p >= 0.5 convention."""
    return forward(m, x, precision).label


def sensitivity(m: Mlp, m2: Mlp, x) -> float:
    """Absolute output-probability deviation between two same-shape models."""
    if not m.same_architecture(m2):
        raise ArchitectureMismatch(
            f"architectures differ: {m.widths} vs {m2.widths}"
        )
    return abs(forward(m, x).probability - forward(m2, x).probability)


def sip(m: Mlp, x) -> float:
    """Sensitivity to innocent perturbation: float32 vs float16-stored weights."""
    p32 = forward(m, x, Precision.FLOAT32).probability
    p16 = forward(m, x, Precision.FLOAT16_ROUNDTRIP).probability
    return abs(p32 - p16)
