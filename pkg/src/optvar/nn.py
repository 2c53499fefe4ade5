"""Dense MLP engine operating on a single flat parameter vector.

The parameter layout is normative for the whole package: for each layer,
the weight matrix (n_in x n_out, row-major) followed by the bias vector,
layers in input-to-output order. Gradients, updates, and Jacobian rows
all index into this layout, so it must never change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MlpSpec",
    "Model",
    "Batch",
    "init_model",
    "forward_logits",
    "softmax",
    "ce_loss",
    "ce_loss_and_grad",
    "ce_grad",
    "finite_diff_grad",
]


@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes [d, h1, ..., c]. Hidden layers use ReLU, output is affine."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output size")
        if any(s < 1 for s in sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {sizes}")

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        return sum((a + 1) * b for a, b in zip(self.layer_sizes, self.layer_sizes[1:]))


@dataclass(frozen=True, eq=False)
class Model:
    """An MlpSpec plus one flat float64 parameter vector."""

    spec: MlpSpec
    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        object.__setattr__(self, "theta", theta)
        if theta.shape != (self.spec.n_params,):
            raise ValueError(
                f"theta has shape {theta.shape}, spec needs ({self.spec.n_params},)"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta contains non-finite entries")


@dataclass(frozen=True, eq=False)
class Batch:
    """Inputs x (m x d) with one-hot targets t (m x c)."""

    x: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)
        if x.ndim != 2 or t.ndim != 2:
            raise ValueError("batch x and t must be 2-D")
        if x.shape[0] != t.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but t has {t.shape[0]}")
        if not np.all((t == 0.0) | (t == 1.0)) or not np.all(t.sum(axis=1) == 1.0):
            raise ValueError("t rows must be one-hot")


def _layer_dims(spec: MlpSpec) -> list[tuple[int, int]]:
    return list(zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]))


def _unpack(spec: MlpSpec, vec: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """(W, b) views into a flat vector, one pair per layer. No copies."""
    out = []
    off = 0
    for n_in, n_out in _layer_dims(spec):
        w = vec[off : off + n_in * n_out].reshape(n_in, n_out)
        off += n_in * n_out
        b = vec[off : off + n_out]
        off += n_out
        out.append((w, b))
    return out


def init_model(spec: MlpSpec, seed: int) -> Model:
    """He-style init: W ~ N(0, 2/fan_in) per layer, biases zero. Deterministic."""
    rng = np.random.default_rng(seed)
    theta = np.zeros(spec.n_params)
    for (w, _), (n_in, n_out) in zip(_unpack(spec, theta), _layer_dims(spec)):
        w[:] = rng.standard_normal((n_in, n_out)) * np.sqrt(2.0 / n_in)
    return Model(spec, theta)


def _check_x(spec: MlpSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be a 2-D matrix (m x d)")
    if x.shape[1] != spec.in_dim:
        raise ValueError(f"x has {x.shape[1]} columns, model expects {spec.in_dim}")
    return x


def _forward_cached(model: Model, x: np.ndarray):
    """Forward pass keeping layer inputs and hidden pre-activations for backprop."""
    layers = _unpack(model.spec, model.theta)
    inputs = [x]  # input to layer i
    pre = []  # pre-activation of hidden layer i
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        if i < len(layers) - 1:
            pre.append(z)
            h = np.maximum(z, 0.0)
            inputs.append(h)
        else:
            return z, inputs, pre
    raise AssertionError("unreachable")


def forward_logits(model: Model, x: np.ndarray) -> np.ndarray:
    """Logits f(x; theta), shape (m x c). Output layer has no activation."""
    x = _check_x(model.spec, x)
    logits, _, _ = _forward_cached(model, x)
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    """Rowwise exp-normalize with max subtraction for overflow safety."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_batch(model: Model, batch: Batch) -> None:
    if batch.x.shape[1] != model.spec.in_dim:
        raise ValueError(
            f"batch x has {batch.x.shape[1]} columns, model expects {model.spec.in_dim}"
        )
    if batch.t.shape[1] != model.spec.out_dim:
        raise ValueError(
            f"batch t has {batch.t.shape[1]} columns, model expects {model.spec.out_dim}"
        )


def _ce_from_logits(logits: np.ndarray, t: np.ndarray) -> float:
    # mean( logsumexp(z) - <t, z> ), exact and overflow-safe
    zmax = logits.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
    return float(np.mean(lse - (t * logits).sum(axis=1)))


def ce_loss(model: Model, batch: Batch) -> float:
    """Mean softmax cross-entropy of the model on the batch."""
    _check_batch(model, batch)
    logits, _, _ = _forward_cached(model, batch.x)
    return _ce_from_logits(logits, batch.t)


def ce_loss_and_grad(model: Model, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its exact gradient w.r.t. theta, in one pass."""
    _check_batch(model, batch)
    logits, inputs, pre = _forward_cached(model, batch.x)
    loss = _ce_from_logits(logits, batch.t)

    m = batch.x.shape[0]
    layers = _unpack(model.spec, model.theta)
    grad = np.zeros_like(model.theta)
    grad_views = _unpack(model.spec, grad)

    delta = (softmax(logits) - batch.t) / m  # (m, c)
    for i in reversed(range(len(layers))):
        w, _ = layers[i]
        gw, gb = grad_views[i]
        gw[:] = inputs[i].T @ delta
        gb[:] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ w.T) * (pre[i - 1] > 0)
    return loss, grad


def ce_grad(model: Model, batch: Batch) -> np.ndarray:
    """Exact gradient of the mean cross-entropy over the batch."""
    return ce_loss_and_grad(model, batch)[1]


def finite_diff_grad(model: Model, batch: Batch, h: float = 1e-5) -> np.ndarray:
    """Central-difference estimate of the cross-entropy gradient.

    Coordinate by coordinate, so it is O(n_params) forward passes. Meant as
    an independent check on ce_grad, not for training.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    theta = model.theta
    g = np.empty_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        up[i] += h
        dn = theta.copy()
        dn[i] -= h
        g[i] = (
            ce_loss(Model(model.spec, up), batch) - ce_loss(Model(model.spec, dn), batch)
        ) / (2.0 * h)
    return g
