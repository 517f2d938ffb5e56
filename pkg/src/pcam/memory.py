"""Associative-memory operations on top of the predictive-coding core:
storing a dataset as attractors, retrieval from noise via the iterated
clamp-relax-read map, completion from partial inputs, cross-modal
retrieval, and the retrieval metrics."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .core import PcnModel, TrainConfig
from .errors import DimensionError, InvalidInputError


@dataclass(frozen=True)
class ModalityLayout:
    """Disjoint index spans (half-open) partitioning a stored vector."""

    image_span: tuple
    caption_span: tuple

    def validate(self, dim):
        spans = sorted([self.image_span, self.caption_span])
        if spans[0][0] != 0 or spans[1][1] != dim or spans[0][1] != spans[1][0]:
            raise InvalidInputError(
                f"layout {self} does not partition 0..{dim}"
            )


@dataclass
class ExemplarSet:
    """Stored data points as rows of an (N, d) array in [0, 1]."""

    dim: int
    items: np.ndarray
    layout: ModalityLayout = None

    def __post_init__(self):
        self.items = np.asarray(self.items, dtype=np.float64)
        if self.items.ndim != 2 or self.items.shape[1] != self.dim:
            raise InvalidInputError(
                f"items shape {self.items.shape} does not match dim {self.dim}"
            )
        if self.items.size and (
            self.items.min() < 0.0 or self.items.max() > 1.0
        ):
            raise InvalidInputError("exemplar entries must lie in [0, 1]")
        if self.layout is not None:
            self.layout.validate(self.dim)

    def __len__(self):
        return self.items.shape[0]


@dataclass
class RetrievalConfig:
    T_retrieval: int = 250
    gamma: float = 0.05
    F_iterations: int = 30
    threshold: float = 0.005
    clip01: bool = True

    def validate(self):
        if (
            self.T_retrieval < 1
            or self.gamma <= 0
            or self.F_iterations < 0
            or self.threshold <= 0
        ):
            raise InvalidInputError(f"bad retrieval config {self}")


@dataclass
class RetrievalReport:
    per_item: list  # (mse, retrieved) pairs
    rate: float
    threshold: float


def mse(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.mean((a - b) ** 2))


# ---------------------------------------------------------------------------
# storage


def _sequential_epoch(model, items, cfg):
    return backend.active().train_epoch(
        model.weights,
        model.memory,
        model.activation.id,
        items,
        cfg.T,
        cfg.gamma,
        cfg.alpha,
    )


def _batch_epoch(model, items, cfg):
    k = backend.active()
    n = items.shape[0]
    xs = k.feed_backward(model.weights, model.memory, model.activation.id, n)
    xs[0] = items.copy()
    free = np.zeros((n, items.shape[1]))
    _, eps = k.relax(
        model.weights, model.memory, model.activation.id, xs, free, cfg.gamma, cfg.T
    )
    energies = k.energies(eps)
    k.apply_updates(
        model.weights, model.memory, model.activation.id, xs, eps, cfg.alpha, scale=n
    )
    return energies


def store(model, data, cfg=None):
    """Train the model to hold every exemplar as an attractor.

    Each epoch clamps the sensory layer to an item, relaxes the value
    nodes for cfg.T steps, and applies one weight/memory update; items are
    visited sequentially unless cfg.batch_mode averages their updates.
    Stops when the mean relaxed energy drops below cfg.energy_tol or after
    cfg.max_epochs.  Returns (model, per-epoch mean-energy trace).
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    if len(data) == 0:
        raise InvalidInputError("cannot store an empty dataset")
    if data.dim != model.sensory_dim:
        raise DimensionError(
            f"data dim {data.dim} does not match sensory width {model.sensory_dim}"
        )
    epoch_fn = _batch_epoch if cfg.batch_mode else _sequential_epoch
    trace = []
    for _ in range(cfg.max_epochs):
        energies = epoch_fn(model, data.items, cfg)
        trace.append(float(np.mean(energies)))
        if trace[-1] < cfg.energy_tol:
            break
    tail = trace[-max(1, len(trace) // 10) :]
    if any(b > a * (1 + 1e-6) + 1e-12 for a, b in zip(tail, tail[1:])):
        warnings.warn(
            "mean energy rose over the final stretch of training; "
            "the learning rate may be too large",
            stacklevel=2,
        )
    return model, np.asarray(trace)


# ---------------------------------------------------------------------------
# retrieval


def _relax_clamped(model, queries, free_mask, cfg):
    """Feed-backward init, overwrite clamped sensory entries, relax.

    Returns (values, predictions) for the sensory layer, shape (B, d).
    """
    k = backend.active()
    n = queries.shape[0]
    xs = k.feed_backward(model.weights, model.memory, model.activation.id, n)
    xs[0] = np.where(free_mask == 0.0, queries, xs[0])
    mus, _ = k.relax(
        model.weights,
        model.memory,
        model.activation.id,
        xs,
        free_mask,
        cfg.gamma,
        cfg.T_retrieval,
    )
    return xs[0], mus[0]


def denoise_batch(model, queries, cfg, record=False, known_mask=None):
    """The iterated retrieval map applied to each row of ``queries``.

    One iteration clamps the whole sensory layer to the current vector,
    relaxes with frozen parameters, and reads back the sensory prediction;
    outputs are clipped to [0, 1] between iterations when cfg.clip01.
    With ``known_mask``, entries flagged True are reset to the original
    query after every iteration (masked completion, the same re-clamping
    the Hopfield and autoencoder baselines get).  When ``record``, also
    returns the output of every iteration.
    """
    cfg.validate()
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != model.sensory_dim:
        raise DimensionError(
            f"queries shape {queries.shape} does not match sensory width "
            f"{model.sensory_dim}"
        )
    current = queries.copy()
    free = np.zeros((queries.shape[0], queries.shape[1]))
    trajectory = []
    for _ in range(cfg.F_iterations):
        _, prediction = _relax_clamped(model, current, free, cfg)
        current = prediction.copy()
        if cfg.clip01:
            np.clip(current, 0.0, 1.0, out=current)
        if known_mask is not None:
            current[:, known_mask] = queries[:, known_mask]
        if record:
            trajectory.append(current.copy())
    return (current, trajectory) if record else current


def denoise_retrieve(model, query, cfg):
    """Retrieve a stored vector from a corrupted one; parameters frozen."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (model.sensory_dim,):
        raise DimensionError(
            f"query shape {query.shape} does not match sensory width "
            f"{model.sensory_dim}"
        )
    return denoise_batch(model, query[None, :], cfg)[0]


def complete_batch(model, partials, mask, cfg):
    """Masked completion for each row of ``partials``; True marks known."""
    cfg.validate()
    partials = np.asarray(partials, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if partials.ndim != 2 or partials.shape[1] != model.sensory_dim:
        raise DimensionError(
            f"partials shape {partials.shape} does not match sensory width "
            f"{model.sensory_dim}"
        )
    if mask.shape != (model.sensory_dim,):
        raise DimensionError(
            f"mask shape {mask.shape} does not match sensory width "
            f"{model.sensory_dim}"
        )
    if not mask.any():
        raise InvalidInputError("completion needs at least one known entry")
    free = np.broadcast_to(
        (~mask).astype(np.float64), partials.shape
    ).copy()
    values, _ = _relax_clamped(model, partials, free, cfg)
    return values


def complete_retrieve(model, partial, mask, cfg):
    """Retrieve a stored vector given known entries; the value nodes of the
    free entries relax toward the stored attractor and are returned as-is."""
    partial = np.asarray(partial, dtype=np.float64)
    if partial.shape != (model.sensory_dim,):
        raise DimensionError(
            f"partial shape {partial.shape} does not match sensory width "
            f"{model.sensory_dim}"
        )
    return complete_batch(model, partial[None, :], mask, cfg)[0]


def hetero_retrieve(model, known, known_span, layout, cfg):
    """Cross-modal completion: clamp one modality span, recover the rest."""
    d = model.sensory_dim
    start, stop = known_span
    if not (0 <= start < stop <= d):
        raise InvalidInputError(f"span {known_span} outside 0..{d}")
    known = np.asarray(known, dtype=np.float64)
    if known.shape != (stop - start,):
        raise DimensionError(
            f"known vector has shape {known.shape}, span needs {stop - start}"
        )
    layout.validate(d)
    full = np.zeros(d)
    full[start:stop] = known
    mask = np.zeros(d, dtype=bool)
    mask[start:stop] = True
    return complete_retrieve(model, full, mask, cfg)


def evaluate_retrieval(originals, retrieved, threshold):
    """Per-item MSE over every entry, verdicts under the threshold, rate."""
    items = originals.items if isinstance(originals, ExemplarSet) else np.asarray(originals)
    retrieved = np.asarray(retrieved, dtype=np.float64)
    if len(items) != len(retrieved):
        raise InvalidInputError(
            f"{len(items)} originals vs {len(retrieved)} retrieved"
        )
    if len(items) == 0:
        raise InvalidInputError("nothing to evaluate")
    per_item = []
    for orig, rec in zip(items, retrieved):
        err = mse(orig, rec)
        per_item.append((err, bool(err < threshold)))
    rate = float(np.mean([hit for _, hit in per_item]))
    return RetrievalReport(per_item=per_item, rate=rate, threshold=threshold)
