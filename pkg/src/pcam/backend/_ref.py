"""Pure-numpy inference kernels.

This is the fallback backend and the reference the compiled extension is
checked against.  All functions operate in place on batched layer arrays:
``xs[l]`` has shape ``(B, n_l)`` with one sample per row, float64,
C-contiguous.  ``thetas[l]`` has shape ``(n_{l-1}, n_l)`` so that the
top-down signal into layer ``l-1`` is ``f(x_l) @ thetas[l].T``.

Activation ids: 0 = identity, 1 = relu, 2 = tanh.
"""

import numpy as np

NAME = "numpy"

IDENTITY, RELU, TANH = 0, 1, 2


def _f(act, x):
    if act == IDENTITY:
        return x.copy()
    if act == RELU:
        return np.maximum(x, 0.0)
    return np.tanh(x)


def _fprime(act, x):
    if act == IDENTITY:
        return np.ones_like(x)
    if act == RELU:
        # subgradient convention: derivative 0 at x == 0
        return (x > 0.0).astype(np.float64)
    t = np.tanh(x)
    return 1.0 - t * t


def refresh(thetas, b, act, xs, mus, eps):
    """Recompute predictions and errors in place from the current values."""
    L = len(thetas)
    mus[L][:] = b
    for l in range(L - 1, -1, -1):
        mus[l][:] = _f(act, xs[l + 1]) @ thetas[l].T
    for l in range(L + 1):
        np.subtract(xs[l], mus[l], out=eps[l])


def relax(thetas, b, act, xs, free_mask, gamma, T):
    """Run ``T`` inference steps in place on ``xs``.

    ``free_mask`` is a ``(B, d)`` float array of 0/1 flags; sensory entries
    with flag 1 descend the energy gradient, entries with flag 0 stay
    clamped.  Predictions and errors are recomputed after the final step.

    Returns the ``(mus, eps)`` buffers consistent with the final values.
    """
    L = len(thetas)
    mus = [np.empty_like(x) for x in xs]
    eps = [np.empty_like(x) for x in xs]
    for _ in range(T):
        refresh(thetas, b, act, xs, mus, eps)
        for l in range(1, L + 1):
            delta = _fprime(act, xs[l]) * (eps[l - 1] @ thetas[l - 1]) - eps[l]
            xs[l] += gamma * delta
        xs[0] -= gamma * free_mask * eps[0]
    refresh(thetas, b, act, xs, mus, eps)
    return mus, eps


def energies(eps):
    """Per-sample energy: half the squared error summed over every layer."""
    total = np.zeros(eps[0].shape[0])
    for e in eps:
        total += np.einsum("ij,ij->i", e, e)
    return 0.5 * total


def feed_backward(thetas, b, act, batch_size):
    """Initial values for hidden and memory layers: the model's own generation."""
    L = len(thetas)
    xs = [None] * (L + 1)
    xs[L] = np.tile(b, (batch_size, 1))
    for l in range(L - 1, -1, -1):
        xs[l] = _f(act, xs[l + 1]) @ thetas[l].T
    return xs


def apply_updates(thetas, b, act, xs, eps, alpha, scale=1.0):
    """Increment weights and memory from a relaxed state, in place.

    ``scale`` divides the summed per-sample gradients (1 for a single
    sample, B for a batch mean).
    """
    L = len(thetas)
    coeff = alpha / scale
    for l in range(L):
        thetas[l] += coeff * (eps[l].T @ _f(act, xs[l + 1]))
    b += coeff * eps[L].sum(axis=0)


def train_epoch(thetas, b, act, data, T, gamma, alpha):
    """One sequential pass: relax then update, item by item.

    Returns the per-item energy at each item's relaxed state.
    """
    n_items, d = data.shape
    out = np.empty(n_items)
    no_free = np.zeros((1, d))
    for i in range(n_items):
        xs = feed_backward(thetas, b, act, 1)
        xs[0] = data[i : i + 1].copy()
        _, eps = relax(thetas, b, act, xs, no_free, gamma, T)
        out[i] = energies(eps)[0]
        apply_updates(thetas, b, act, xs, eps, alpha)
    return out
