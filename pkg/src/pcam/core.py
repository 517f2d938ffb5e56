"""Generative predictive-coding networks.

A network is a stack of layers 0..L: layer 0 is the sensory layer (width
d), layer L is the memory layer carrying a trainable vector ``b``.  Each
layer receives a top-down prediction from the layer above

    mu_l = theta_{l+1} @ f(x_{l+1})      (mu_L = b)

and local errors ``eps_l = x_l - mu_l`` define the energy

    E = 1/2 * sum_l |eps_l|^2            (layers 0..L inclusive).

Inference relaxes the value nodes by gradient descent on E with step
``gamma`` while some sensory entries stay clamped; a parameter update then
descends E in the weights and memory vector with learning rate ``alpha``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import backend
from .errors import DimensionError, InvalidArchitectureError


class Activation(Enum):
    IDENTITY = "identity"
    RELU = "relu"
    TANH = "tanh"

    @property
    def id(self):
        return {"identity": 0, "relu": 1, "tanh": 2}[self.value]

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self is Activation.IDENTITY:
            return x.copy()
        if self is Activation.RELU:
            return np.maximum(x, 0.0)
        return np.tanh(x)

    def derivative(self, x):
        """Pointwise f'; the relu derivative at 0 is taken to be 0."""
        x = np.asarray(x, dtype=np.float64)
        if self is Activation.IDENTITY:
            return np.ones_like(x)
        if self is Activation.RELU:
            return (x > 0.0).astype(np.float64)
        t = np.tanh(x)
        return 1.0 - t * t


@dataclass
class PcnModel:
    """Network parameters: layer widths, weight matrices, memory vector.

    ``weights[l]`` has shape ``(widths[l], widths[l+1])``: entry (k, i)
    connects neuron i of layer l+1 to neuron k of layer l.
    """

    widths: tuple
    weights: list
    memory: np.ndarray
    activation: Activation

    @property
    def depth(self):
        return len(self.widths) - 1

    @property
    def sensory_dim(self):
        return self.widths[0]

    def copy(self):
        return PcnModel(
            widths=tuple(self.widths),
            weights=[w.copy() for w in self.weights],
            memory=self.memory.copy(),
            activation=self.activation,
        )

    def parameter_bytes(self):
        """Concatenated raw bytes of all parameters; used to assert that
        retrieval never touches them."""
        parts = [w.tobytes() for w in self.weights]
        parts.append(self.memory.tobytes())
        return b"".join(parts)

    def validate(self):
        if len(self.widths) < 2 or any(n <= 0 for n in self.widths):
            raise InvalidArchitectureError(f"bad layer widths {self.widths}")
        for l, w in enumerate(self.weights):
            expect = (self.widths[l], self.widths[l + 1])
            if w.shape != expect:
                raise DimensionError(
                    f"weight matrix {l + 1} has shape {w.shape}, expected {expect}"
                )
        if self.memory.shape != (self.widths[-1],):
            raise DimensionError(
                f"memory vector has shape {self.memory.shape}, "
                f"expected ({self.widths[-1]},)"
            )
        for w in self.weights:
            if not np.all(np.isfinite(w)):
                raise InvalidArchitectureError("non-finite weight entries")
        if not np.all(np.isfinite(self.memory)):
            raise InvalidArchitectureError("non-finite memory entries")


@dataclass
class InferenceState:
    """Per-layer value nodes with their predictions and errors."""

    values: list
    predictions: list
    errors: list

    def copy(self):
        return InferenceState(
            values=[v.copy() for v in self.values],
            predictions=[p.copy() for p in self.predictions],
            errors=[e.copy() for e in self.errors],
        )


@dataclass
class ClampSpec:
    """Which sensory entries are pinned during inference, and to what."""

    clamped: np.ndarray
    clamp_values: np.ndarray

    @classmethod
    def all(cls, values):
        values = np.asarray(values, dtype=np.float64)
        return cls(np.ones(values.shape[0], dtype=bool), values)

    @classmethod
    def none(cls, dim):
        return cls(np.zeros(dim, dtype=bool), np.zeros(dim))

    def free_row(self):
        """(1, d) float 0/1 row: 1 where the sensory node may move."""
        return (~self.clamped).astype(np.float64)[None, :]


@dataclass
class TrainConfig:
    T: int = 32
    gamma: float = 0.05
    alpha: float = 2e-2
    max_epochs: int = 4000
    energy_tol: float = 1e-5
    seed: int = 0
    batch_mode: bool = False

    def validate(self):
        if self.T < 1 or self.gamma <= 0 or self.alpha <= 0 or self.energy_tol < 0:
            raise InvalidArchitectureError(f"bad training config {self}")


def init_model(widths, activation=Activation.RELU, seed=0):
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.

    The memory vector uses its own layer width as fan-in.
    """
    widths = tuple(int(n) for n in widths)
    if len(widths) < 2 or any(n <= 0 for n in widths):
        raise InvalidArchitectureError(
            f"need at least two positive layer widths, got {widths}"
        )
    if isinstance(activation, str):
        activation = Activation(activation)
    rng = np.random.default_rng(seed)
    weights = []
    for l in range(len(widths) - 1):
        bound = 1.0 / np.sqrt(widths[l + 1])
        weights.append(rng.uniform(-bound, bound, size=(widths[l], widths[l + 1])))
    bound = 1.0 / np.sqrt(widths[-1])
    memory = rng.uniform(-bound, bound, size=widths[-1])
    return PcnModel(widths=widths, weights=weights, memory=memory, activation=activation)


def _check_state(model, state):
    if len(state.values) != model.depth + 1:
        raise DimensionError(
            f"state has {len(state.values)} layers, model has {model.depth + 1}"
        )
    for l, v in enumerate(state.values):
        if v.shape != (model.widths[l],):
            raise DimensionError(
                f"layer {l} values have shape {v.shape}, expected ({model.widths[l]},)"
            )


def make_state(model, sensory=None):
    """Fresh state: sensory from ``sensory`` (or zeros), hidden and memory
    layers from a feed-backward pass through the model's own generation."""
    rows = backend.active().feed_backward(
        model.weights, model.memory, model.activation.id, 1
    )
    values = [np.ascontiguousarray(r[0]) for r in rows]
    if sensory is not None:
        sensory = np.asarray(sensory, dtype=np.float64)
        if sensory.shape != (model.sensory_dim,):
            raise DimensionError(
                f"sensory vector has shape {sensory.shape}, "
                f"expected ({model.sensory_dim},)"
            )
        values[0] = sensory.copy()
    state = InferenceState(
        values=values,
        predictions=[np.zeros_like(v) for v in values],
        errors=[np.zeros_like(v) for v in values],
    )
    return refresh(model, state)


def refresh(model, state):
    """Recompute predictions and errors from the current values, in place."""
    _check_state(model, state)
    xs = [v[None, :] for v in state.values]
    mus = [p[None, :] for p in state.predictions]
    eps = [e[None, :] for e in state.errors]
    backend.active().refresh(
        model.weights, model.memory, model.activation.id, xs, mus, eps
    )
    return state


def energy(state):
    """Half the squared error summed over all layers, memory included."""
    return 0.5 * float(sum(float(e @ e) for e in state.errors))


def inference_step(model, state, clamp, gamma):
    """One gradient-descent step of the value nodes; clamped sensory entries
    stay fixed, free ones move by -gamma * eps0.  Refreshes afterwards."""
    return run_inference(model, state, clamp, gamma, 1)


def run_inference(model, state, clamp, gamma, T):
    """Apply ``T`` inference steps in place and return the refreshed state."""
    if T < 0:
        raise InvalidArchitectureError(f"T must be >= 0, got {T}")
    _check_state(model, state)
    if clamp.clamped.shape != (model.sensory_dim,):
        raise DimensionError(
            f"clamp mask has shape {clamp.clamped.shape}, "
            f"expected ({model.sensory_dim},)"
        )
    state.values[0][clamp.clamped] = clamp.clamp_values[clamp.clamped]
    xs = [np.ascontiguousarray(v[None, :]) for v in state.values]
    mus, eps = backend.active().relax(
        model.weights,
        model.memory,
        model.activation.id,
        xs,
        clamp.free_row(),
        gamma,
        T,
    )
    for l in range(model.depth + 1):
        state.values[l][:] = xs[l][0]
        state.predictions[l][:] = mus[l][0]
        state.errors[l][:] = eps[l][0]
    return state


def update_parameters(model, state, alpha):
    """Hebbian-style descent on the weights and memory vector, in place.

    Each weight gains alpha * eps_l outer f(x_{l+1}); the memory vector
    gains alpha * eps_L, the negative gradient of the energy.
    """
    if alpha <= 0:
        raise InvalidArchitectureError(f"alpha must be positive, got {alpha}")
    _check_state(model, state)
    xs = [v[None, :] for v in state.values]
    eps = [e[None, :] for e in state.errors]
    backend.active().apply_updates(
        model.weights, model.memory, model.activation.id, xs, eps, alpha
    )
    return model
