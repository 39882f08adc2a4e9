"""One-hidden-layer feedforward model with identity activation.

The model is implemented twice with the same update formula:

* a fixed-point path (`forward`, `train_step`) whose arithmetic matches
  the constraint system gadget for gadget, and
* a real-valued reference path (`reference_forward`,
  `reference_train_step`) that runs in floats or exact Fractions and
  serves as the testing oracle.

Update rule, with identity activation and one-hot labels:

    delta[k][j] = (1/m) * (yhat[k][j] - y[k][j])
    w'[i][j]    = w[i][j] - alpha_eff * sum_k delta[k][j] * x[k][i]
    b'[j]       = b[j]    - alpha_eff * sum_k delta[k][j]

where alpha_eff = alpha / batch_size is a single fixed-point constant.
Summation order is fixed (k ascending, then i ascending) so the circuit
wiring and witness are deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import EmptyDataError
from .fixedpoint import (
    FX_ZERO,
    FxConfig,
    FxNum,
    _to_signed,
    decode,
    encode,
    fx_add,
    fx_from_wire,
    fx_mul,
    fx_sub,
    fx_to_wire,
)


@dataclass(frozen=True)
class Model:
    """Weights (n x m) and biases (m) in fixed point; shape is immutable."""

    weights: tuple  # tuple of n rows, each a tuple of m FxNum
    biases: tuple  # tuple of m FxNum

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def m(self) -> int:
        return len(self.biases)

    @classmethod
    def zeros(cls, n: int, m: int) -> "Model":
        row = (FX_ZERO,) * m
        return cls(weights=(row,) * n, biases=(FX_ZERO,) * m)

    def to_json(self, cfg: FxConfig) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "scale_bits": cfg.scale_bits,
            "weights": [[fx_to_wire(w) for w in row] for row in self.weights],
            "biases": [fx_to_wire(b) for b in self.biases],
        }

    @classmethod
    def from_json(cls, obj: dict, cfg: FxConfig) -> "Model":
        if obj["scale_bits"] != cfg.scale_bits:
            raise ValueError("model encoded at a different scale")
        weights = tuple(
            tuple(fx_from_wire(w, cfg) for w in row) for row in obj["weights"]
        )
        biases = tuple(fx_from_wire(b, cfg) for b in obj["biases"])
        model = cls(weights=weights, biases=biases)
        if model.n != obj["n"] or model.m != obj["m"]:
            raise ValueError("model shape does not match header")
        return model


def model_digest(model: Model, cfg: FxConfig) -> str:
    """SHA-256 of the canonical JSON serialization."""
    import hashlib

    blob = json.dumps(model.to_json(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class Batch:
    """Fixed-size training input: B rows of n features plus class labels."""

    inputs: tuple  # tuple of B rows, each a tuple of n FxNum
    labels: tuple  # tuple of B ints in [0, m)

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Hyperparams:
    alpha: FxNum  # learning rate, > 0
    batch_size: int
    n: int
    m: int

    def __post_init__(self):
        if self.alpha.magnitude <= 0 or self.alpha.negative:
            raise ValueError("alpha must be > 0")
        if self.batch_size < 1 or self.n < 1 or self.m < 1:
            raise ValueError("batch_size, n, m must be >= 1")


def alpha_eff(hp: Hyperparams, cfg: FxConfig) -> FxNum:
    """alpha / batch_size as one fixed-point constant (no in-circuit division)."""
    return encode(decode(hp.alpha, cfg) / hp.batch_size, cfg)


def one_over_m(m: int, cfg: FxConfig) -> FxNum:
    return encode(Fraction(1, m), cfg)


def one_hot(label: int, m: int, cfg: FxConfig) -> tuple:
    if not 0 <= label < m:
        raise ValueError(f"label {label} outside [0, {m})")
    one = encode(1, cfg)
    return tuple(one if j == label else FX_ZERO for j in range(m))


def forward(model: Model, x: Sequence[FxNum], cfg: FxConfig) -> list:
    """yhat[j] = b[j] + sum_i x[i] * w[i][j], accumulated with i ascending."""
    if len(x) != model.n:
        raise ValueError("input size does not match model")
    out = []
    for j in range(model.m):
        acc = model.biases[j]
        for i in range(model.n):
            acc = fx_add(acc, fx_mul(x[i], model.weights[i][j], cfg), cfg)
        out.append(acc)
    return out


def predict(yhat: Sequence) -> int:
    """Index of the largest component; ties break to the lowest index."""
    best = 0
    if isinstance(yhat[0], FxNum):
        key = [_to_signed(v) for v in yhat]
    else:
        key = list(yhat)
    for j in range(1, len(key)):
        if key[j] > key[best]:
            best = j
    return best


def loss(yhat: Sequence[FxNum], y: Sequence[FxNum], cfg: FxConfig) -> FxNum:
    """Mean squared error over the m outputs, in fixed point."""
    m = len(yhat)
    acc = FX_ZERO
    for j in range(m):
        d = fx_sub(yhat[j], y[j], cfg)
        acc = fx_add(acc, fx_mul(d, d, cfg), cfg)
    return fx_mul(one_over_m(m, cfg), acc, cfg)


def train_step(model: Model, batch: Batch, hp: Hyperparams, cfg: FxConfig) -> Model:
    """One gradient-descent update in fixed point.

    Bit-for-bit identical to the arithmetic proven by the training
    circuit: every product is truncated toward zero after rescale, all
    sums run in the fixed order.
    """
    if model.n != hp.n or model.m != hp.m or batch.size != hp.batch_size:
        raise ValueError("shapes do not match hyperparameters")
    inv_m = one_over_m(hp.m, cfg)
    a_eff = alpha_eff(hp, cfg)

    deltas = []  # B x m
    for k in range(batch.size):
        yhat = forward(model, batch.inputs[k], cfg)
        target = one_hot(batch.labels[k], hp.m, cfg)
        deltas.append(
            [fx_mul(inv_m, fx_sub(yhat[j], target[j], cfg), cfg) for j in range(hp.m)]
        )

    new_weights = []
    for i in range(hp.n):
        row = []
        for j in range(hp.m):
            grad = FX_ZERO
            for k in range(batch.size):
                grad = fx_add(grad, fx_mul(deltas[k][j], batch.inputs[k][i], cfg), cfg)
            row.append(fx_sub(model.weights[i][j], fx_mul(a_eff, grad, cfg), cfg))
        new_weights.append(tuple(row))

    new_biases = []
    for j in range(hp.m):
        grad = FX_ZERO
        for k in range(batch.size):
            grad = fx_add(grad, deltas[k][j], cfg)
        new_biases.append(fx_sub(model.biases[j], fx_mul(a_eff, grad, cfg), cfg))

    return Model(weights=tuple(new_weights), biases=tuple(new_biases))


def accuracy(model: Model, data: Sequence, cfg: FxConfig) -> float:
    """Fraction of (features, label) pairs classified correctly."""
    if len(data) == 0:
        raise EmptyDataError("accuracy over an empty set")
    hits = 0
    for features, label in data:
        if predict(forward(model, features, cfg)) == label:
            hits += 1
    return hits / len(data)


# --- reference path -------------------------------------------------------
#
# Same formula in plain real arithmetic.  Works with floats or Fractions,
# whichever number type the caller passes in; with Fractions the result
# is exact.


def model_to_real(model: Model, cfg: FxConfig, number=Fraction):
    weights = [[number(decode(w, cfg)) for w in row] for row in model.weights]
    biases = [number(decode(b, cfg)) for b in model.biases]
    return weights, biases


def reference_forward(weights, biases, x) -> list:
    n, m = len(weights), len(biases)
    return [biases[j] + sum(x[i] * weights[i][j] for i in range(n)) for j in range(m)]


def reference_loss(yhat, y):
    m = len(yhat)
    return sum((yhat[j] - y[j]) ** 2 for j in range(m)) / m


def reference_train_step(weights, biases, inputs, labels, alpha_eff_value, m):
    """Reference update; `alpha_eff_value` is the real value of the fixed-point constant."""
    n = len(weights)
    batch = len(labels)
    deltas = []
    for k in range(batch):
        yhat = reference_forward(weights, biases, inputs[k])
        deltas.append([(yhat[j] - (1 if labels[k] == j else 0)) / m for j in range(m)])

    new_weights = [
        [
            weights[i][j]
            - alpha_eff_value * sum(deltas[k][j] * inputs[k][i] for k in range(batch))
            for j in range(m)
        ]
        for i in range(n)
    ]
    new_biases = [
        biases[j] - alpha_eff_value * sum(deltas[k][j] for k in range(batch))
        for j in range(m)
    ]
    return new_weights, new_biases
