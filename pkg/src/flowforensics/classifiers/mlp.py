"""One-hidden-layer sigmoid perceptron trained by per-record SGD with momentum.

The loss for a batch of B records is the mean over records of
``0.5 * sum_k (o_k - t_k)**2`` where ``o`` is the 2-unit sigmoid output and
``t`` the one-hot label. Flattened parameter order is
``w1`` (n_in x n_hidden, row-major), ``b1``, ``w2`` (n_hidden x 2, row-major), ``b2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from numba import njit

from ..flow_model import Dataset, FlowRecord, SchemaError


@dataclass(frozen=True, eq=False)
class MlpModel:
    features: tuple[str, ...]
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    input_mean: np.ndarray
    input_scale: np.ndarray
    learning_rate: float = 0.3
    momentum: float = 0.2
    epochs: int = 500
    seed: int = 0

    @property
    def layer_sizes(self) -> tuple[int, int, int]:
        return (self.w1.shape[0], self.w1.shape[1], self.w2.shape[1])

    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat_params(self, theta: np.ndarray) -> "MlpModel":
        n_in, n_h, n_out = self.layer_sizes
        theta = np.asarray(theta, dtype=np.float64)
        sizes = np.cumsum([n_in * n_h, n_h, n_h * n_out, n_out])
        if len(theta) != sizes[-1]:
            raise ValueError(f"expected {sizes[-1]} parameters, got {len(theta)}")
        w1, b1, w2, b2, _ = np.split(theta, sizes)
        return replace(self, w1=w1.reshape(n_in, n_h).copy(), b1=b1.copy(), w2=w2.reshape(n_h, n_out).copy(), b2=b2.copy())


def default_hidden(n_features: int, n_classes: int = 2) -> int:
    return math.ceil((n_features + n_classes) / 2)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@njit(cache=True)
def _sgd_epoch(X, T, order, w1, b1, w2, b2, v1, vb1, v2, vb2, lr, momentum):
    n_in, n_h = w1.shape
    n_out = w2.shape[1]
    h = np.empty(n_h)
    o = np.empty(n_out)
    do = np.empty(n_out)
    dh = np.empty(n_h)
    for r in order:
        x = X[r]
        for j in range(n_h):
            z = b1[j]
            for i in range(n_in):
                z += x[i] * w1[i, j]
            h[j] = 1.0 / (1.0 + np.exp(-z))
        for k in range(n_out):
            z = b2[k]
            for j in range(n_h):
                z += h[j] * w2[j, k]
            o[k] = 1.0 / (1.0 + np.exp(-z))
            do[k] = (o[k] - T[r, k]) * o[k] * (1.0 - o[k])
        for j in range(n_h):
            s = 0.0
            for k in range(n_out):
                s += w2[j, k] * do[k]
            dh[j] = s * h[j] * (1.0 - h[j])
        for j in range(n_h):
            for k in range(n_out):
                v2[j, k] = momentum * v2[j, k] - lr * h[j] * do[k]
                w2[j, k] += v2[j, k]
        for k in range(n_out):
            vb2[k] = momentum * vb2[k] - lr * do[k]
            b2[k] += vb2[k]
        for i in range(n_in):
            for j in range(n_h):
                v1[i, j] = momentum * v1[i, j] - lr * x[i] * dh[j]
                w1[i, j] += v1[i, j]
        for j in range(n_h):
            vb1[j] = momentum * vb1[j] - lr * dh[j]
            b1[j] += vb1[j]


def _inputs(d: Dataset, features: Sequence[str]) -> np.ndarray:
    if tuple(d.schema.feature_names) != tuple(features):
        raise SchemaError("dataset features do not match the network's inputs")
    return np.column_stack([d.column(f) for f in features]) if features else np.empty((len(d), 0))


def _standardize(m: MlpModel, X: np.ndarray) -> np.ndarray:
    Z = (X - m.input_mean) / m.input_scale
    # Missing inputs sit at the training mean.
    return np.where(np.isnan(Z), 0.0, Z)


def _one_hot(labels: np.ndarray) -> np.ndarray:
    T = np.zeros((len(labels), 2))
    T[np.arange(len(labels)), labels] = 1.0
    return T


def train_mlp(
    d: Dataset,
    n_hidden: Optional[int] = None,
    learning_rate: float = 0.3,
    momentum: float = 0.2,
    epochs: int = 500,
    seed: int = 0,
) -> MlpModel:
    cat = d.schema.categorical_features()
    if cat:
        raise SchemaError(
            f"the network needs numeric inputs; one-hot encode categorical features first: {', '.join(cat)}"
        )
    features = d.schema.feature_names
    if n_hidden is None:
        n_hidden = default_hidden(len(features))
    if n_hidden < 1 or epochs < 0:
        raise ValueError("n_hidden must be >= 1 and epochs >= 0")
    X = _inputs(d, features)
    T = _one_hot(d.labels)

    with np.errstate(invalid="ignore"):
        mean = np.nanmean(X, axis=0) if len(X) else np.zeros(X.shape[1])
        scale = np.nanstd(X, axis=0) if len(X) else np.ones(X.shape[1])
    mean = np.where(np.isnan(mean), 0.0, mean)
    scale = np.where(~np.isfinite(scale) | (scale == 0), 1.0, scale)

    rng = np.random.default_rng(seed)
    n_in = len(features)
    w1 = rng.uniform(-0.5, 0.5, (n_in, n_hidden))
    b1 = rng.uniform(-0.5, 0.5, n_hidden)
    w2 = rng.uniform(-0.5, 0.5, (n_hidden, 2))
    b2 = rng.uniform(-0.5, 0.5, 2)
    model = MlpModel(features, w1, b1, w2, b2, mean, scale, learning_rate, momentum, epochs, seed)

    Z = np.ascontiguousarray(_standardize(model, X))
    v1, vb1, v2, vb2 = (np.zeros_like(a) for a in (w1, b1, w2, b2))
    for _ in range(epochs):
        order = rng.permutation(len(Z))
        _sgd_epoch(Z, T, order, w1, b1, w2, b2, v1, vb1, v2, vb2, learning_rate, momentum)
    return model


def forward(m: MlpModel, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hidden and output activations for standardized inputs ``Z``."""
    H = _sigmoid(Z @ m.w1 + m.b1)
    return H, _sigmoid(H @ m.w2 + m.b2)


def _batch_arrays(m: MlpModel, batch: Union[Dataset, Sequence[FlowRecord]]):
    records = batch.records if isinstance(batch, Dataset) else list(batch)
    if not records:
        raise ValueError("gradient of an empty batch is undefined")
    for r in records:
        if len(r.features) != len(m.features):
            raise SchemaError(f"record has {len(r.features)} features, model expects {len(m.features)}")
        if r.label is None:
            raise SchemaError("gradient needs labelled records")
    X = np.array([[np.nan if v is None else v for v in r.features] for r in records], dtype=np.float64)
    X = X.reshape(len(records), len(m.features))
    T = _one_hot(np.array([r.label for r in records]))
    return _standardize(m, X), T


def mlp_loss(m: MlpModel, batch) -> float:
    Z, T = _batch_arrays(m, batch)
    _, O = forward(m, Z)
    return float(0.5 * ((O - T) ** 2).sum(axis=1).mean())


def mlp_loss_gradient(m: MlpModel, batch) -> np.ndarray:
    """Backpropagated gradient of :func:`mlp_loss`, flattened in parameter order."""
    Z, T = _batch_arrays(m, batch)
    H, O = forward(m, Z)
    B = len(Z)
    d_out = (O - T) * O * (1 - O) / B
    d_hid = (d_out @ m.w2.T) * H * (1 - H)
    return np.concatenate([(Z.T @ d_hid).ravel(), d_hid.sum(axis=0), (H.T @ d_out).ravel(), d_out.sum(axis=0)])


def decide(outputs) -> int:
    # Exact ties resolve to normal.
    return 1 if outputs[1] > outputs[0] else 0


def predict_mlp(m: MlpModel, r: FlowRecord) -> tuple[int, tuple[float, float]]:
    if len(r.features) != len(m.features):
        raise SchemaError(f"record has {len(r.features)} features, model expects {len(m.features)}")
    if any(isinstance(v, str) for v in r.features):
        raise SchemaError("the network needs numeric inputs")
    x = np.array([[np.nan if v is None else v for v in r.features]], dtype=np.float64).reshape(1, -1)
    _, O = forward(m, _standardize(m, x))
    out = (float(O[0, 0]), float(O[0, 1]))
    return decide(out), out


def predict_mlp_dataset(m: MlpModel, d: Dataset) -> np.ndarray:
    _, O = forward(m, _standardize(m, _inputs(d, m.features)))
    return (O[:, 1] > O[:, 0]).astype(np.int64)
