"""Comparison models: modern Hopfield networks (one-shot storage, softmax
readout) and backprop-trained autoencoders used as iterated-map memories."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidArchitectureError, InvalidInputError
from .memory import ExemplarSet


# ---------------------------------------------------------------------------
# modern Hopfield network


@dataclass
class MhnModel:
    """Stored patterns as columns of a (d, M) matrix plus an inverse
    temperature; retrieval is a softmax-weighted recombination."""

    patterns: np.ndarray
    beta: float

    @property
    def dim(self):
        return self.patterns.shape[0]


def mhn_build(items, beta, copies=1):
    """One-shot storage: each item becomes ``copies`` identical columns."""
    rows = items.items if isinstance(items, ExemplarSet) else np.asarray(items)
    if rows.size == 0 or len(rows) == 0:
        raise InvalidInputError("cannot build a Hopfield memory from no items")
    if beta <= 0 or not np.isfinite(beta):
        raise InvalidInputError(f"beta must be positive and finite, got {beta}")
    if copies < 1:
        raise InvalidInputError(f"copies must be >= 1, got {copies}")
    cols = np.repeat(rows.T, copies, axis=1)
    return MhnModel(patterns=np.ascontiguousarray(cols, dtype=np.float64), beta=float(beta))


def _softmax(z):
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def mhn_step(model, query):
    """One update: X @ softmax(beta * X^T q), a convex combination of the
    stored columns."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (model.dim,):
        raise DimensionError(
            f"query shape {query.shape} does not match pattern dim {model.dim}"
        )
    weights = _softmax(model.beta * (model.patterns.T @ query)[:, None])[:, 0]
    return model.patterns @ weights


def mhn_retrieve(model, query, iters=10, mask=None):
    """Iterate the update; with a mask, known entries are re-clamped to the
    query after every step, mirroring the completion protocol."""
    if iters < 1:
        raise InvalidInputError(f"iters must be >= 1, got {iters}")
    query = np.asarray(query, dtype=np.float64)
    state = query.copy()
    for _ in range(iters):
        state = mhn_step(model, state)
        if mask is not None:
            state[mask] = query[mask]
    return state


# ---------------------------------------------------------------------------
# autoencoder


@dataclass
class AeModel:
    """A plain MLP trained to reproduce its input: relu hidden layers,
    identity output."""

    widths: tuple
    weights: list  # weights[l] has shape (widths[l+1], widths[l])
    biases: list
    loss_history: np.ndarray = None

    @property
    def dim(self):
        return self.widths[0]


def ae_init(widths, seed=0):
    widths = tuple(int(n) for n in widths)
    if len(widths) < 2 or any(n <= 0 for n in widths):
        raise InvalidArchitectureError(f"bad autoencoder widths {widths}")
    if widths[0] != widths[-1]:
        raise InvalidArchitectureError(
            f"autoencoder input width {widths[0]} != output width {widths[-1]}"
        )
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for l in range(len(widths) - 1):
        bound = 1.0 / np.sqrt(widths[l])
        weights.append(rng.uniform(-bound, bound, size=(widths[l + 1], widths[l])))
        biases.append(rng.uniform(-bound, bound, size=widths[l + 1]))
    return AeModel(widths=widths, weights=weights, biases=biases)


def ae_forward(model, x):
    """Reconstruction of each row of ``x`` (also accepts a single vector)."""
    single = x.ndim == 1
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if h.shape[1] != model.dim:
        raise DimensionError(
            f"input width {h.shape[1]} does not match model dim {model.dim}"
        )
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.T + b
        if l != last:
            np.maximum(h, 0.0, out=h)
    return h[0] if single else h


def ae_loss_and_gradients(model, x):
    """Mean-squared reconstruction loss and its reverse-mode gradients.

    Loss = mean over items and entries of (recon − x)²; returns
    (loss, weight grads, bias grads).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n_items = x.shape[0]
    last = len(model.weights) - 1
    acts = [x]
    pre = []
    h = x
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if l == last else np.maximum(z, 0.0)
        acts.append(h)
    diff = acts[-1] - x
    loss = float(np.mean(diff**2))
    # d loss / d recon, folded constants included
    grad = (2.0 / diff.size) * diff
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for l in range(last, -1, -1):
        if l != last:
            grad = grad * (pre[l] > 0.0)
        grads_w[l] = grad.T @ acts[l]
        grads_b[l] = grad.sum(axis=0)
        if l > 0:
            grad = grad @ model.weights[l]
    del n_items
    return loss, grads_w, grads_b


def ae_train(widths, data, epochs, lr, seed=0):
    """Full-batch gradient descent on the reconstruction loss."""
    items = data.items if isinstance(data, ExemplarSet) else np.asarray(data)
    model = ae_init(widths, seed=seed)
    if items.shape[1] != model.dim:
        raise InvalidArchitectureError(
            f"data dim {items.shape[1]} does not match widths {widths}"
        )
    history = np.empty(epochs)
    for epoch in range(epochs):
        loss, grads_w, grads_b = ae_loss_and_gradients(model, items)
        history[epoch] = loss
        for w, g in zip(model.weights, grads_w):
            w -= lr * g
        for b, g in zip(model.biases, grads_b):
            b -= lr * g
    model.loss_history = history
    return model


def ae_retrieve(model, query, iters=10, mask=None):
    """Iterate the reconstruction map, clipping to [0, 1]; with a mask the
    known entries are re-clamped after every pass."""
    if iters < 1:
        raise InvalidInputError(f"iters must be >= 1, got {iters}")
    query = np.asarray(query, dtype=np.float64)
    state = query.copy()
    for _ in range(iters):
        state = np.clip(ae_forward(model, state), 0.0, 1.0)
        if mask is not None:
            state[mask] = query[mask]
    return state
