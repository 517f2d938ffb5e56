"""Data ingestion and corruption: image tensors and their file formats,
Gaussian noise, retrieval masks, the caption codec, and the bundled
procedural corpora used by the desk-scale experiments."""

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidInputError, VocabularyError
from .memory import ExemplarSet, ModalityLayout

PAD_TOKEN = "<pad>"
MAX_VOCAB = 1000


# ---------------------------------------------------------------------------
# image tensors and file formats


@dataclass
class ImageTensor:
    """A (channels, height, width) image with pixels in [0, 1].

    Flattening is channel-major: vector index = (c * H + y) * W + x.
    """

    channels: int
    height: int
    width: int
    pixels: np.ndarray

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3:
            raise InvalidInputError(f"expected a 3-d array, got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], arr.shape[2], arr)

    @classmethod
    def from_flat(cls, vec, shape):
        c, h, w = shape
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != c * h * w:
            raise InvalidInputError(
                f"vector of length {vec.size} does not fill shape {shape}"
            )
        return cls(c, h, w, vec.reshape(c, h, w).copy())

    @property
    def shape(self):
        return (self.channels, self.height, self.width)

    def flatten(self):
        return self.pixels.reshape(-1).copy()


def _parse_netpbm_header(blob, path):
    """Return (magic, width, height, maxval, payload_offset)."""
    if len(blob) < 2:
        raise FormatError(f"{path}: file too short for a netpbm header", offset=0)
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unknown magic {magic!r}", offset=0)
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        token = blob[start:pos]
        if not re.fullmatch(rb"[0-9]+", token):
            raise FormatError(
                f"{path}: expected integer header field, got {token!r}",
                offset=start,
            )
        fields.append(int(token))
    if pos >= len(blob):
        raise FormatError(f"{path}: header ends before payload", offset=pos)
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    return magic, width, height, maxval, pos


def _read_netpbm(blob, path):
    magic, width, height, maxval, pos = _parse_netpbm_header(blob, path)
    if maxval != 255:
        raise FormatError(
            f"{path}: unsupported max value {maxval} (only 255)", offset=2
        )
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    payload = blob[pos : pos + need]
    if len(payload) < need:
        raise FormatError(
            f"{path}: payload truncated ({len(payload)} of {need} bytes)",
            offset=pos + len(payload),
        )
    raw = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    # netpbm interleaves channels per pixel; internal layout is channel-major
    pixels = raw.reshape(height, width, channels).transpose(2, 0, 1)
    return ImageTensor(channels, height, width, pixels.copy())


PCTN_MAGIC = b"PCTN"


def _read_pctn(blob, path):
    if blob[:4] != PCTN_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}", offset=0)
    head = np.frombuffer(blob, dtype="<u4", count=3, offset=0)
    version, rank = int(head[1]), int(head[2])
    if version != 1:
        raise FormatError(f"{path}: unsupported container version {version}", offset=4)
    if rank != 3:
        raise FormatError(f"{path}: expected rank 3, got {rank}", offset=8)
    dims_off = 12
    if len(blob) < dims_off + 4 * rank:
        raise FormatError(f"{path}: truncated dimension list", offset=len(blob))
    dims = np.frombuffer(blob, dtype="<u4", count=rank, offset=dims_off)
    c, h, w = (int(v) for v in dims)
    payload_off = dims_off + 4 * rank
    need = 4 * c * h * w
    if len(blob) < payload_off + need:
        raise FormatError(
            f"{path}: payload truncated ({len(blob) - payload_off} of {need} bytes)",
            offset=len(blob),
        )
    vals = np.frombuffer(blob, dtype="<f4", count=c * h * w, offset=payload_off)
    return ImageTensor(c, h, w, vals.astype(np.float64).reshape(c, h, w))


def read_tensor(path, format=None):
    """Read an image tensor; the format is sniffed from the magic bytes
    unless given explicitly ('ppm', 'pgm', or 'pctn')."""
    with open(path, "rb") as fh:
        blob = fh.read()
    magic = blob[:4]
    if format is None:
        if magic[:2] in (b"P5", b"P6"):
            format = "ppm"
        elif magic == PCTN_MAGIC:
            format = "pctn"
        else:
            raise FormatError(f"{path}: unrecognized magic {magic!r}", offset=0)
    if format in ("ppm", "pgm"):
        return _read_netpbm(blob, path)
    if format == "pctn":
        return _read_pctn(blob, path)
    raise InvalidInputError(f"unknown tensor format {format!r}")


def write_tensor(tensor, path, format=None):
    """Write PPM (3-channel), PGM (1-channel), or the raw float container."""
    if format is None:
        suffix = str(path).rsplit(".", 1)[-1].lower()
        format = suffix if suffix in ("ppm", "pgm", "pctn") else "pctn"
    if format in ("ppm", "pgm"):
        expected = 3 if format == "ppm" else 1
        if tensor.channels != expected:
            raise InvalidInputError(
                f"{format} needs {expected} channel(s), tensor has {tensor.channels}"
            )
        magic = b"P6" if format == "ppm" else b"P5"
        header = magic + b"\n%d %d\n255\n" % (tensor.width, tensor.height)
        interleaved = tensor.pixels.transpose(1, 2, 0)
        payload = (
            np.round(np.clip(interleaved, 0.0, 1.0) * 255.0)
            .astype(np.uint8)
            .tobytes()
        )
        blob = header + payload
    elif format == "pctn":
        head = np.array(
            [1, 3, tensor.channels, tensor.height, tensor.width], dtype="<u4"
        )
        blob = (
            PCTN_MAGIC
            + head.tobytes()
            + tensor.pixels.astype("<f4").tobytes()
        )
    else:
        raise InvalidInputError(f"unknown tensor format {format!r}")
    with open(path, "wb") as fh:
        fh.write(blob)
    return path


# ---------------------------------------------------------------------------
# corruption


def corrupt_gaussian(x, level, seed, level_is="variance"):
    """Add i.i.d. Gaussian noise; ``level`` is the noise variance by default
    (pass level_is='std' for the alternative reading).  No clipping: the
    corrupted query may leave [0, 1]."""
    if level < 0:
        raise InvalidInputError(f"noise level must be >= 0, got {level}")
    if level_is not in ("variance", "std"):
        raise InvalidInputError(f"level_is must be 'variance' or 'std', got {level_is}")
    x = np.asarray(x, dtype=np.float64)
    std = np.sqrt(level) if level_is == "variance" else level
    rng = np.random.default_rng(seed)
    return x + rng.normal(0.0, 1.0, size=x.shape) * std


def make_mask(d, kind, fraction, geometry=None, seed=0):
    """Boolean mask over a flat vector; True marks KNOWN entries.

    random_pixels: exactly round(fraction*d) known entries.
    center_patch:  a centered square covering (1-fraction) of each channel
                   is unknown; needs the (C, H, W) geometry.
    half_rows:     the top round(fraction*H) rows are known.
    """
    if not 0 < fraction <= 1:
        raise InvalidInputError(f"fraction must be in (0, 1], got {fraction}")
    if kind == "random_pixels":
        n_known = int(round(fraction * d))
        rng = np.random.default_rng(seed)
        mask = np.zeros(d, dtype=bool)
        mask[rng.choice(d, size=n_known, replace=False)] = True
        return mask
    if geometry is None:
        raise InvalidInputError(f"mask kind {kind!r} needs an image geometry")
    c, h, w = geometry
    if c * h * w != d:
        raise InvalidInputError(f"geometry {geometry} does not match d={d}")
    plane = np.ones((h, w), dtype=bool)
    if kind == "center_patch":
        side = int(round(np.sqrt((1.0 - fraction) * h * w)))
        side = min(side, h, w)
        r0, c0 = (h - side) // 2, (w - side) // 2
        plane[r0 : r0 + side, c0 : c0 + side] = False
    elif kind == "half_rows":
        known_rows = int(round(fraction * h))
        plane[:] = False
        plane[:known_rows, :] = True
    else:
        raise InvalidInputError(f"unknown mask kind {kind!r}")
    return np.broadcast_to(plane, (c, h, w)).reshape(-1).copy()


# ---------------------------------------------------------------------------
# caption codec


@dataclass(frozen=True)
class Vocabulary:
    """Ordered distinct tokens; index 0 is the reserved padding token."""

    tokens: tuple

    def __post_init__(self):
        if len(self.tokens) > MAX_VOCAB:
            raise InvalidInputError(
                f"vocabulary of {len(self.tokens)} exceeds {MAX_VOCAB} tokens"
            )
        if len(set(self.tokens)) != len(self.tokens):
            raise InvalidInputError("vocabulary tokens must be distinct")
        if not self.tokens or self.tokens[0] != PAD_TOKEN:
            raise InvalidInputError(f"token 0 must be the {PAD_TOKEN!r} sentinel")

    @property
    def size(self):
        return len(self.tokens)

    @property
    def index(self):
        return {tok: i for i, tok in enumerate(self.tokens)}

    @classmethod
    def from_corpus(cls, captions):
        """First-occurrence ordering over whitespace tokens, PAD first."""
        seen = {}
        for line in captions:
            for word in line.split():
                seen.setdefault(word, None)
        return cls(tokens=(PAD_TOKEN, *seen.keys()))

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            toks = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        return cls(tokens=tuple(toks))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.tokens) + "\n")
        return path


def encode_caption(text, vocab, pad_to=25):
    """Whitespace tokens -> normalized codes k/V, zero-padded to length P."""
    words = text.split()
    if len(words) > pad_to:
        raise InvalidInputError(
            f"caption of {len(words)} words exceeds pad length {pad_to}"
        )
    index = vocab.index
    out = np.zeros(pad_to, dtype=np.float64)
    for i, word in enumerate(words):
        if word not in index:
            raise VocabularyError(f"word {word!r} not in vocabulary")
        out[i] = index[word] / vocab.size
    return out


def decode_caption(vec, vocab):
    """Round each entry back to a token index and drop trailing padding."""
    vec = np.asarray(vec, dtype=np.float64)
    codes = np.clip(np.round(vec * vocab.size).astype(int), 0, vocab.size - 1)
    words = [vocab.tokens[k] for k in codes]
    while words and words[-1] == PAD_TOKEN:
        words.pop()
    return " ".join(words)


# ---------------------------------------------------------------------------
# bundled desk-scale corpora


def make_images(n_items, shape=(3, 32, 32), seed=0):
    """Procedural natural-looking textures: per-channel base luminance,
    smooth blobs, an oriented grating, light pixel noise; clipped to [0,1].

    Luminance varies strongly across items on purpose, mirroring natural
    photo statistics (overlapping, non-normalized dot products).
    """
    if n_items < 1:
        raise InvalidInputError(f"need at least one item, got {n_items}")
    c, h, w = shape
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, h), np.linspace(0.0, 1.0, w), indexing="ij"
    )
    items = np.empty((n_items, c * h * w))
    for k in range(n_items):
        img = np.empty((c, h, w))
        img[:] = rng.uniform(0.15, 0.85, size=c)[:, None, None]
        for _ in range(int(rng.integers(2, 5))):
            cy, cx = rng.uniform(0.0, 1.0, size=2)
            spread = rng.uniform(0.08, 0.35)
            amp = rng.uniform(-0.6, 0.6, size=c)
            blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * spread**2))
            img += amp[:, None, None] * blob
        angle = rng.uniform(0.0, np.pi)
        freq = rng.uniform(2.0, 6.0)
        phases = rng.uniform(0.0, 2 * np.pi, size=c)
        wave = 2 * np.pi * freq * (np.cos(angle) * xx + np.sin(angle) * yy)
        img += rng.uniform(0.05, 0.25) * np.sin(wave[None] + phases[:, None, None])
        img += rng.normal(0.0, 0.02, size=(c, h, w))
        items[k] = np.clip(img, 0.0, 1.0).reshape(-1)
    return ExemplarSet(dim=c * h * w, items=items)


_CAPTION_POOLS = {
    "opener": ["a", "the", "one", "some"],
    "adjective": [
        "small", "large", "young", "old", "bright", "dark", "quiet", "busy",
        "red", "blue", "green", "yellow", "gray", "striped", "spotted",
        "happy", "tired", "curious", "careful", "playful",
    ],
    "noun": [
        "dog", "cat", "bird", "horse", "child", "woman", "man", "worker",
        "boat", "train", "bicycle", "kite", "ball", "tree", "flower",
        "mountain", "river", "market", "garden", "street",
    ],
    "verb": [
        "runs", "walks", "jumps", "sleeps", "plays", "stands", "waits",
        "climbs", "swims", "flies", "rests", "watches", "sings", "eats",
    ],
    "place": [
        "park", "beach", "field", "kitchen", "yard", "station", "bridge",
        "forest", "hill", "harbor", "square", "meadow",
    ],
}


def make_captions(n_items, seed=0):
    """Deterministic toy sentences drawn from fixed word pools."""
    rng = np.random.default_rng(seed)
    pick = lambda key: _CAPTION_POOLS[key][rng.integers(len(_CAPTION_POOLS[key]))]
    out = []
    for _ in range(n_items):
        words = [pick("opener"), pick("adjective"), pick("noun"), pick("verb")]
        if rng.random() < 0.8:
            words += ["near", pick("opener"), pick("adjective"), pick("place")]
        if rng.random() < 0.4:
            words += ["with", pick("opener"), pick("adjective"), pick("noun")]
        out.append(" ".join(words))
    return out


def make_captioned_images(n_items, shape=(3, 32, 32), pad_to=25, seed=0):
    """Images with captions appended: returns (ExemplarSet, captions, vocab).

    The exemplar vectors are [image pixels | caption codes] with a layout
    marking the two spans.
    """
    images = make_images(n_items, shape=shape, seed=seed)
    captions = make_captions(n_items, seed=seed + 1)
    vocab = Vocabulary.from_corpus(captions)
    codes = np.stack([encode_caption(c, vocab, pad_to) for c in captions])
    d_img = images.dim
    items = np.concatenate([images.items, codes], axis=1)
    layout = ModalityLayout(
        image_span=(0, d_img), caption_span=(d_img, d_img + pad_to)
    )
    data = ExemplarSet(dim=d_img + pad_to, items=items, layout=layout)
    return data, captions, vocab


def load_captions(path):
    """One caption per line, whitespace-tokenized."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]
