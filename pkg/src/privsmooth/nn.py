"""Dense two-layer ReLU classifier.

Forward pass, exact backpropagation for softmax cross-entropy with an L1
penalty masked to selected first-layer input columns, mini-batch SGD
training, and a structured-text checkpoint format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream

_CHECKPOINT_SCHEMA = 1

# fixed stream tags so training is a pure function of (dataset, seed)
_INIT_STREAM = 101
_SHUFFLE_STREAM = 102


@dataclass
class MlpModel:
    """Two-layer ReLU network: logits = w2 @ relu(w1 @ x + b1) + b2."""

    w1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (classes, hidden)
    b2: np.ndarray  # (classes,)

    def __post_init__(self):
        h, d = self.w1.shape
        k, h2 = self.w2.shape
        if self.b1.shape != (h,) or h2 != h or self.b2.shape != (k,):
            raise ValueError(
                f"inconsistent model shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}"
            )

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[0]

    def copy(self) -> "MlpModel":
        return MlpModel(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


@dataclass
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 0.05
    l1_lambda: float = 0.0
    l1_mask: np.ndarray | None = None  # boolean over input columns
    seed: int = 0
    hidden_size: int = 64
    n_classes: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.l1_lambda < 0:
            raise ValueError(f"l1_lambda must be >= 0, got {self.l1_lambda}")
        if self.hidden_size < 1:
            raise ValueError(f"hidden_size must be >= 1, got {self.hidden_size}")


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Logits for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ValueError(f"expected input of shape ({model.input_dim},), got {x.shape}")
    hidden = np.maximum(model.w1 @ x + model.b1, 0.0)
    return model.w2 @ hidden + model.b2


# rows per slab in forward_batch; sized so hidden activations stay in cache
_FORWARD_CHUNK = 8192


def forward_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Logits for a (m, input_dim) batch."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(f"expected (m, {model.input_dim}) batch, got {X.shape}")
    m = X.shape[0]
    if m <= _FORWARD_CHUNK:
        hidden = np.maximum(X @ model.w1.T + model.b1, 0.0)
        return hidden @ model.w2.T + model.b2
    out = np.empty((m, model.n_classes))
    for start in range(0, m, _FORWARD_CHUNK):
        block = X[start : start + _FORWARD_CHUNK]
        hidden = np.maximum(block @ model.w1.T + model.b1, 0.0)
        out[start : start + block.shape[0]] = hidden @ model.w2.T + model.b2
    return out


def predict_label(model: MlpModel, x: np.ndarray) -> int:
    """Argmax class; ties broken toward the smallest class index."""
    return int(np.argmax(forward(model, x)))


def predict_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(forward_batch(model, X), axis=1)


def batch_predictor(model: MlpModel):
    """Label-only batched classifier function over (m, input_dim) arrays."""

    def classify(X: np.ndarray) -> np.ndarray:
        return predict_batch(model, X)

    return classify


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_gradients(
    model: MlpModel, X: np.ndarray, y: np.ndarray, cfg: TrainConfig
) -> tuple[float, Gradients]:
    """Mean softmax cross-entropy plus the masked L1 penalty, with exact gradients.

    Subgradient 0 is taken at both the ReLU kink and the |w| kink.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("loss_and_gradients requires a non-empty (m, d) batch")
    if y.shape != (X.shape[0],):
        raise ValueError(f"labels shape {y.shape} does not match batch of {X.shape[0]}")
    m = X.shape[0]

    z1 = X @ model.w1.T + model.b1
    h1 = np.maximum(z1, 0.0)
    logits = h1 @ model.w2.T + model.b2
    probs = _softmax(logits)
    ce = -np.log(probs[np.arange(m), y]).mean()

    loss = ce
    if cfg.l1_lambda > 0 and cfg.l1_mask is not None:
        mask = np.asarray(cfg.l1_mask, dtype=bool)
        if mask.shape != (model.input_dim,):
            raise ValueError(f"l1_mask must have length {model.input_dim}, got {mask.shape}")
        loss += cfg.l1_lambda * np.abs(model.w1[:, mask]).sum()

    dlogits = probs
    dlogits[np.arange(m), y] -= 1.0
    dlogits /= m
    dw2 = dlogits.T @ h1
    db2 = dlogits.sum(axis=0)
    dh1 = dlogits @ model.w2
    dz1 = dh1 * (z1 > 0.0)
    dw1 = dz1.T @ X
    db1 = dz1.sum(axis=0)
    if cfg.l1_lambda > 0 and cfg.l1_mask is not None:
        mask = np.asarray(cfg.l1_mask, dtype=bool)
        dw1[:, mask] += cfg.l1_lambda * np.sign(model.w1[:, mask])

    return float(loss), Gradients(dw1, db1, dw2, db2)


def init_model(input_dim: int, hidden: int, n_classes: int, stream: RngStream) -> MlpModel:
    """Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)); zero biases."""
    a1 = np.sqrt(6.0 / (input_dim + hidden))
    a2 = np.sqrt(6.0 / (hidden + n_classes))
    w1 = stream.uniform(-a1, a1, (hidden, input_dim))
    w2 = stream.uniform(-a2, a2, (n_classes, hidden))
    return MlpModel(w1, np.zeros(hidden), w2, np.zeros(n_classes))


def train(X: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> MlpModel:
    """Seeded-shuffle mini-batch SGD; a pure function of (X, y, cfg)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("train requires a non-empty (m, d) dataset")
    if y.shape != (X.shape[0],):
        raise ValueError("labels do not match dataset length")
    n_classes = cfg.n_classes if cfg.n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("labels out of range")

    model = init_model(X.shape[1], cfg.hidden_size, n_classes, RngStream(cfg.seed, _INIT_STREAM))
    shuffler = RngStream(cfg.seed, _SHUFFLE_STREAM)
    n = X.shape[0]
    for _ in range(cfg.epochs):
        order = shuffler.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, g = loss_and_gradients(model, X[idx], y[idx], cfg)
            model.w1 -= cfg.learning_rate * g.w1
            model.b1 -= cfg.learning_rate * g.b1
            model.w2 -= cfg.learning_rate * g.w2
            model.b2 -= cfg.learning_rate * g.b2
        for p in (model.w1, model.b1, model.w2, model.b2):
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("non-finite parameters after training step")
    return model


def save_model(model: MlpModel, path) -> None:
    """Checkpoint as a JSON document with row-major weight arrays."""
    doc = {
        "schema_version": _CHECKPOINT_SCHEMA,
        "dims": {
            "input": model.input_dim,
            "hidden": model.hidden_dim,
            "classes": model.n_classes,
        },
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != _CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema: {doc.get('schema_version')!r}")
    dims = doc["dims"]
    w1 = np.asarray(doc["w1"], dtype=float)
    b1 = np.asarray(doc["b1"], dtype=float)
    w2 = np.asarray(doc["w2"], dtype=float)
    b2 = np.asarray(doc["b2"], dtype=float)
    expected = {
        "w1": (dims["hidden"], dims["input"]),
        "b1": (dims["hidden"],),
        "w2": (dims["classes"], dims["hidden"]),
        "b2": (dims["classes"],),
    }
    for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
        if arr.shape != expected[name]:
            raise ValueError(f"checkpoint field {name} has shape {arr.shape}, expected {expected[name]}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"checkpoint field {name} contains non-finite values")
    return MlpModel(w1, b1, w2, b2)
