"""Dense fully-connected ReLU classifier: forward pass, cross-entropy loss,
backpropagation and an Adam optimizer.

All arithmetic is float64.  Hidden layers use ReLU, the output layer is
identity (pre-softmax logits).  Predictions break argmax ties in favor of the
lowest class index, which is what ``np.argmax`` does.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CHECKPOINT_FORMAT = "relu-mlp-checkpoint-v1"


class ContractError(ValueError):
    """An operation was called with arguments that violate its contract."""


@dataclass
class Sample:
    """One labeled input: vector ``x`` and class index ``y``."""

    x: np.ndarray
    y: int

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = int(self.y)


@dataclass
class MlpParams:
    """Weights and biases of a dense ReLU network.

    ``weights[k]`` has shape (out, in); ``biases[k]`` has shape (out,).
    Consecutive layer dimensions must chain and all entries must be finite.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        self.validate()

    def validate(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ContractError("need one bias vector per weight matrix")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ContractError(f"layer {k}: weight {w.shape} / bias {b.shape} mismatch")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ContractError(f"layer {k}: input dim {w.shape[1]} does not chain")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ContractError(f"layer {k}: non-finite parameter")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def class_count(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_sizes(self) -> list[int]:
        return [w.shape[0] for w in self.weights[:-1]]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class Gradients:
    """Per-layer gradient arrays, shaped exactly like :class:`MlpParams`."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "Gradients":
        return cls([np.zeros_like(w) for w in params.weights],
                   [np.zeros_like(b) for b in params.biases])

    def norm(self) -> float:
        total = 0.0
        for g in self.weights + self.biases:
            total += float(np.sum(g * g))
        return float(np.sqrt(total))


def init_params(layer_sizes: Sequence[int], seed: int) -> MlpParams:
    """Seeded Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases."""
    if len(layer_sizes) < 2:
        raise ContractError("need at least input and output sizes")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Logits for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != params.input_dim:
        raise ContractError(f"input dim {x.shape} != {params.input_dim}")
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(w @ h + b, 0.0)
    return params.weights[-1] @ h + params.biases[-1]


def forward_batch(params: MlpParams, xs: np.ndarray) -> np.ndarray:
    """Logits for a batch, shape (n, class_count)."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != params.input_dim:
        raise ContractError(f"batch shape {xs.shape} incompatible with input dim {params.input_dim}")
    h = xs
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
    return h @ params.weights[-1].T + params.biases[-1]


def predict(params: MlpParams, x: np.ndarray) -> int:
    """Predicted class; exact logit ties go to the lowest class index."""
    return int(np.argmax(forward(params, x)))


def predict_batch(params: MlpParams, xs: np.ndarray) -> np.ndarray:
    return np.argmax(forward_batch(params, xs), axis=1)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def cross_entropy(logits: np.ndarray, y: int) -> float:
    """Stable -log softmax(logits)[y]; max-shift before exponentiation."""
    logits = np.asarray(logits, dtype=float)
    if not np.isfinite(logits).all():
        raise ContractError("non-finite logits")
    if not 0 <= y < logits.shape[-1]:
        raise ContractError(f"label {y} outside [0, {logits.shape[-1]})")
    return float(-_log_softmax(logits)[y])


def cross_entropy_mean(logits: np.ndarray, ys: np.ndarray) -> float:
    """Mean cross-entropy over a batch of logit rows."""
    logits = np.asarray(logits, dtype=float)
    ys = np.asarray(ys, dtype=int)
    lsm = _log_softmax(logits)
    return float(-np.mean(lsm[np.arange(len(ys)), ys]))


def _forward_cached(params: MlpParams, xs: np.ndarray):
    """Forward pass keeping post-activation values of every layer."""
    acts = [xs]
    h = xs
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
        acts.append(h)
    logits = h @ params.weights[-1].T + params.biases[-1]
    return logits, acts


def backward_arrays(params: MlpParams, xs: np.ndarray, ys: np.ndarray) -> Gradients:
    """Gradient of mean cross-entropy over (xs, ys) w.r.t. all parameters."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=int)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise ContractError("empty or mis-shaped batch")
    n = xs.shape[0]
    logits, acts = _forward_cached(params, xs)
    # d(mean CE)/d(logits) = (softmax - onehot) / n
    lsm = _log_softmax(logits)
    delta = np.exp(lsm)
    delta[np.arange(n), ys] -= 1.0
    delta /= n

    grads_w = [np.empty(0)] * len(params.weights)
    grads_b = [np.empty(0)] * len(params.biases)
    for k in range(len(params.weights) - 1, -1, -1):
        grads_w[k] = delta.T @ acts[k]
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k]) * (acts[k] > 0.0)
    return Gradients(grads_w, grads_b)


def backward(params: MlpParams, batch: Sequence[Sample]) -> Gradients:
    """Gradient of mean cross-entropy over a batch of samples."""
    if len(batch) == 0:
        raise ContractError("empty batch")
    xs = np.stack([s.x for s in batch])
    ys = np.array([s.y for s in batch], dtype=int)
    return backward_arrays(params, xs, ys)


@dataclass
class AdamState:
    """Adam accumulators; shapes mirror the parameters they update."""

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0
    alpha: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init_like(cls, params: MlpParams, alpha: float = 0.01,
                  beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in params.weights],
            v_w=[np.zeros_like(w) for w in params.weights],
            m_b=[np.zeros_like(b) for b in params.biases],
            v_b=[np.zeros_like(b) for b in params.biases],
            alpha=alpha, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(params: MlpParams, grads: Gradients, state: AdamState):
    """In-place Adam update with bias correction; returns (params, state)."""
    if len(grads.weights) != len(params.weights):
        raise ContractError("gradient/parameter layer count mismatch")
    for gw, w in zip(grads.weights, params.weights):
        if gw.shape != w.shape:
            raise ContractError(f"gradient shape {gw.shape} != parameter shape {w.shape}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for arrs, moms, vels, gs in (
        (params.weights, state.m_w, state.v_w, grads.weights),
        (params.biases, state.m_b, state.v_b, grads.biases),
    ):
        for a, m, v, g in zip(arrs, moms, vels, gs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            a -= state.alpha * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return params, state


def save_checkpoint(params: MlpParams, path, config: dict | None = None):
    """Write the model as a single JSON document.

    Fields: ``format``, ``layer_sizes``, ``weights`` (row-major nested lists,
    one per layer), ``biases``, and the optional creation ``config``.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "layer_sizes": params.layer_sizes,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "config": config or {},
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Returns (params, config).
    """
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ContractError(f"unrecognized checkpoint format {doc.get('format')!r}")
    params = MlpParams([np.array(w) for w in doc["weights"]],
                       [np.array(b) for b in doc["biases"]])
    if params.layer_sizes != list(doc["layer_sizes"]):
        raise ContractError("checkpoint layer_sizes disagree with stored arrays")
    return params, doc.get("config", {})
