"""Binary model container.

Layout (all little-endian): magic "PCAM", version u32, code u32,
depth u32, layer widths u32 each, then the payload as f32.

The code field combines model type and activation: code = 16*type + act,
with act in {0: identity, 1: relu, 2: tanh}.  Predictive-coding models are
type 0, so their files carry the bare activation code.  Payloads:

  type 0 (PCN): weight matrices row-major in layer order, memory vector.
  type 1 (MHN): widths are [d, M]; pattern matrix row-major, then beta.
  type 2 (AE):  per layer, weight matrix row-major then its bias vector.
"""

import numpy as np

from .baselines import AeModel, MhnModel
from .core import Activation, PcnModel
from .errors import FormatError

MAGIC = b"PCAM"
VERSION = 1

_TYPE_PCN, _TYPE_MHN, _TYPE_AE = 0, 1, 2
_ACT_BY_ID = {0: Activation.IDENTITY, 1: Activation.RELU, 2: Activation.TANH}


def _header(code, widths):
    head = np.array([VERSION, code, len(widths) - 1, *widths], dtype="<u4")
    return MAGIC + head.tobytes()


def _f32(arr):
    return np.asarray(arr, dtype=np.float64).astype("<f4").tobytes()


def save_model(model, path):
    """Serialize a PCN, MHN, or AE model; returns the path."""
    if isinstance(model, PcnModel):
        blob = _header(model.activation.id, model.widths)
        blob += b"".join(_f32(w) for w in model.weights)
        blob += _f32(model.memory)
    elif isinstance(model, MhnModel):
        d, m = model.patterns.shape
        blob = _header(16 * _TYPE_MHN, (d, m))
        blob += _f32(model.patterns)
        blob += _f32([model.beta])
    elif isinstance(model, AeModel):
        blob = _header(16 * _TYPE_AE + Activation.RELU.id, model.widths)
        for w, b in zip(model.weights, model.biases):
            blob += _f32(w) + _f32(b)
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    with open(path, "wb") as fh:
        fh.write(blob)
    return path


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.path = path
        self.pos = 0

    def take_u32(self, count):
        need = 4 * count
        if len(self.blob) < self.pos + need:
            raise FormatError(
                f"{self.path}: truncated header", offset=len(self.blob)
            )
        out = np.frombuffer(self.blob, dtype="<u4", count=count, offset=self.pos)
        self.pos += need
        return [int(v) for v in out]

    def take_f32(self, shape):
        count = int(np.prod(shape))
        need = 4 * count
        if len(self.blob) < self.pos + need:
            raise FormatError(
                f"{self.path}: truncated payload "
                f"({len(self.blob) - self.pos} of {need} bytes)",
                offset=len(self.blob),
            )
        out = np.frombuffer(self.blob, dtype="<f4", count=count, offset=self.pos)
        self.pos += need
        return out.astype(np.float64).reshape(shape)


def load_model(path):
    """Read back any model written by save_model."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}", offset=0)
    rd = _Reader(blob, path)
    rd.pos = 4
    version, code, depth = rd.take_u32(3)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)
    widths = rd.take_u32(depth + 1)
    mtype, act_id = divmod(code, 16)
    if mtype == _TYPE_PCN:
        if act_id not in _ACT_BY_ID:
            raise FormatError(f"{path}: unknown activation code {act_id}", offset=8)
        weights = [
            rd.take_f32((widths[l], widths[l + 1])) for l in range(depth)
        ]
        memory = rd.take_f32((widths[-1],))
        return PcnModel(
            widths=tuple(widths),
            weights=weights,
            memory=memory,
            activation=_ACT_BY_ID[act_id],
        )
    if mtype == _TYPE_MHN:
        patterns = rd.take_f32((widths[0], widths[1]))
        beta = float(rd.take_f32((1,))[0])
        return MhnModel(patterns=patterns, beta=beta)
    if mtype == _TYPE_AE:
        weights, biases = [], []
        for l in range(depth):
            weights.append(rd.take_f32((widths[l + 1], widths[l])))
            biases.append(rd.take_f32((widths[l + 1],)))
        return AeModel(widths=tuple(widths), weights=weights, biases=biases)
    raise FormatError(f"{path}: unknown model type code {code}", offset=8)
