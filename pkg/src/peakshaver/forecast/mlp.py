"""Small feedforward networks: ReLU hidden layers, linear output, dropout.

Training is full-batch gradient descent with the ADAM update on
mean-squared error. Dropout uses inverted scaling (activations divided by
the keep probability during training) so inference needs no rescaling, and
masks are redrawn each epoch from the training seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpModel:
    """Weights, biases and per-hidden-layer dropout probabilities."""

    weights: tuple
    biases: tuple
    dropout: tuple

    def __post_init__(self):
        w = tuple(np.asarray(m, dtype=float) for m in self.weights)
        b = tuple(np.asarray(v, dtype=float) for v in self.biases)
        p = tuple(float(q) for q in self.dropout)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "dropout", p)
        if not w or len(w) != len(b):
            raise DomainError("need one bias vector per weight matrix")
        for i, (m, v) in enumerate(zip(w, b)):
            if m.ndim != 2 or v.ndim != 1 or m.shape[1] != len(v):
                raise DomainError(f"layer {i}: weight {m.shape} and bias "
                                  f"{v.shape} are incompatible")
            if i and w[i - 1].shape[1] != m.shape[0]:
                raise DomainError(f"layer {i - 1} emits {w[i - 1].shape[1]} "
                                  f"features but layer {i} expects {m.shape[0]}")
        if len(p) != len(w) - 1:
            raise DomainError("need one dropout probability per hidden layer")
        if any(not 0.0 <= q < 1.0 for q in p):
            raise DomainError("dropout probabilities must lie in [0, 1)")

    @property
    def layer_widths(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(m.shape[1] for m in self.weights)


def init_mlp(widths, dropout=None, seed: int = 0) -> MlpModel:
    """He-initialized network of the given layer widths."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise DomainError("need at least an input and an output width")
    if dropout is None:
        dropout = (0.0,) * (len(widths) - 2)
    rng = np.random.default_rng(seed)
    weights = tuple(
        rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in)
        for fan_in, fan_out in zip(widths, widths[1:]))
    biases = tuple(np.zeros(w) for w in widths[1:])
    return MlpModel(weights, biases, tuple(dropout))


def pv_day_ahead_model(seed: int = 0) -> MlpModel:
    """24 irradiance + 24 temperature values in, next 24 h of PV out."""
    return init_mlp((48, 96, 24), (0.25,), seed)


def demand_day_ahead_model(seed: int = 0) -> MlpModel:
    """24 irradiance + 24 temperature + previous 12 h of demand in."""
    return init_mlp((60, 96, 60, 24), (0.0, 0.0), seed)


def demand_multi_day_model(seed: int = 0) -> MlpModel:
    """Day-4 horizon variant with heavier dropout."""
    return init_mlp((48, 96, 72, 24), (0.45, 0.40), seed)


def _as_batch(x, width: int, label: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise DomainError(f"{label} must have width {width}, got shape {arr.shape}")
    return arr


def predict_mlp(model: MlpModel, x) -> np.ndarray:
    """Deterministic forward pass with dropout disabled."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    a = _as_batch(arr, model.layer_widths[0], "input")
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ w + b
        if i < last:
            a = np.maximum(a, 0.0)
    return a[0] if single else a


def loss_and_grads(model: MlpModel, inputs, targets, masks=None):
    """Mean-squared error and its gradient in every weight and bias.

    masks, when given, carries one multiplier array per hidden layer
    (inverted-dropout scaling, as drawn by train_mlp).
    """
    x = _as_batch(inputs, model.layer_widths[0], "inputs")
    y = _as_batch(targets, model.layer_widths[-1], "targets")
    if x.shape[0] != y.shape[0]:
        raise DomainError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
    last = len(model.weights) - 1

    acts = [x]
    pre = []
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        pre.append(z)
        if i < last:
            h = np.maximum(z, 0.0)
            if masks is not None:
                h = h * masks[i]
            acts.append(h)
        else:
            acts.append(z)

    diff = acts[-1] - y
    loss = float(np.mean(diff * diff))

    d_z = diff * (2.0 / diff.size)
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for i in range(last, -1, -1):
        grads_w[i] = acts[i].T @ d_z
        grads_b[i] = d_z.sum(axis=0)
        if i:
            d_h = d_z @ model.weights[i].T
            if masks is not None:
                d_h = d_h * masks[i - 1]
            d_z = d_h * (pre[i - 1] > 0.0)
    return loss, grads_w, grads_b


def train_mlp(model: MlpModel, inputs, targets, epochs: int,
              learning_rate: float = 0.01, seed: int = 0):
    """Full-batch ADAM training; returns the trained model and a loss trace.

    The trace holds the (dropout-masked) loss evaluated before each update,
    so trace[0] is the starting loss. Zero epochs returns the model as is.
    """
    if epochs < 0:
        raise DomainError(f"epochs must be >= 0, got {epochs}")
    x = _as_batch(inputs, model.layer_widths[0], "inputs")
    y = _as_batch(targets, model.layer_widths[-1], "targets")
    if x.shape[0] != y.shape[0]:
        raise DomainError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
    if epochs == 0:
        return model, []

    rng = np.random.default_rng(seed)
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    params = weights + biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    trace = []
    hidden_widths = model.layer_widths[1:-1]

    for epoch in range(epochs):
        masks = None
        if any(p > 0.0 for p in model.dropout):
            masks = []
            for width, p in zip(hidden_widths, model.dropout):
                if p > 0.0:
                    keep = rng.random((x.shape[0], width)) >= p
                    masks.append(keep / (1.0 - p))
                else:
                    masks.append(np.ones((x.shape[0], width)))
        current = MlpModel(tuple(weights), tuple(biases), model.dropout)
        loss, gw, gb = loss_and_grads(current, x, y, masks)
        trace.append(loss)

        t = epoch + 1
        scale1 = 1.0 - ADAM_BETA1 ** t
        scale2 = 1.0 - ADAM_BETA2 ** t
        for p, g, mom, sec in zip(params, gw + gb, m1, m2):
            mom *= ADAM_BETA1
            mom += (1.0 - ADAM_BETA1) * g
            sec *= ADAM_BETA2
            sec += (1.0 - ADAM_BETA2) * g * g
            p -= learning_rate * (mom / scale1) / (np.sqrt(sec / scale2) + ADAM_EPS)

    return MlpModel(tuple(weights), tuple(biases), model.dropout), trace
