"""Feature extractors standing in for the ViT backbones, and the classification head.

Two extractors are provided:

* :class:`SyntheticExtractor` - a fixed random patch embedding
  ``tanh(W p + b)`` over non-overlapping 16x16 patches, drawn once from a seed.
* :class:`EmbeddingFileExtractor` - serves token maps precomputed offline
  (for example by a real CLIP or SigLIP backbone) from an FDEB file.

FDEB layout (all little-endian)::

    b"FDEB" | version u16 | T u32 | D u32 | rows u64
    per row: id_len u16 | id (UTF-8) | T*D float32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from featdistill.errors import FormatError, InvalidArgument, NotFound
from featdistill.image import SeededRng

PATCH = 16
FDEB_MAGIC = b"FDEB"
FDEB_VERSION = 1
_HEADER = struct.Struct("<4sHIIQ")


@dataclass(frozen=True)
class FeatureMap:
    values: np.ndarray  # (T, D)
    pooled: np.ndarray  # (D,)

    @classmethod
    def from_tokens(cls, values) -> FeatureMap:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidArgument(f"token map must be T x D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("token map contains non-finite values")
        return cls(values, values.mean(axis=0))

    @property
    def tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def patchify(tensor: np.ndarray, patch: int = PATCH) -> np.ndarray:
    """Split an S x S x C tensor into (S/patch)^2 flattened patches, row-major."""
    s, s2, c = tensor.shape
    g = s // patch
    x = tensor.reshape(g, patch, g, patch, c).transpose(0, 2, 1, 3, 4)
    return x.reshape(g * g, patch * patch * c)


class SyntheticExtractor:
    needs_pixels = True

    def __init__(self, seed: int, input_side: int, dim: int, channels: int = 3, patch: int = PATCH):
        if input_side % patch:
            raise InvalidArgument(f"input_side {input_side} must be a multiple of {patch}")
        if dim < 1:
            raise InvalidArgument("dim must be >= 1")
        self.seed = int(seed)
        self.input_side = int(input_side)
        self.dim = int(dim)
        self.channels = channels
        self.patch = patch
        fan_in = patch * patch * channels
        rng = SeededRng(self.seed)
        self.weight = rng.normal(0.0, 1.0 / np.sqrt(fan_in), (dim, fan_in))
        self.bias = rng.normal(0.0, 0.1, dim)
        self.descriptor = f"synthetic(seed={self.seed},side={input_side},dim={dim})"

    @property
    def tokens(self) -> int:
        return (self.input_side // self.patch) ** 2

    def extract(self, tensor, item_id=None) -> FeatureMap:
        tensor = np.asarray(tensor, dtype=np.float64)
        expected = (self.input_side, self.input_side, self.channels)
        if tensor.shape != expected:
            raise InvalidArgument(f"{self.descriptor}: expected tensor {expected}, got {tensor.shape}")
        return FeatureMap.from_tokens(np.tanh(patchify(tensor, self.patch) @ self.weight.T + self.bias))


class EmbeddingFileExtractor:
    needs_pixels = False

    def __init__(self, path):
        self.path = str(path)
        self.rows = load_embeddings(path)
        self.descriptor = f"embeddings({Path(path).name})"
        first = next(iter(self.rows.values()), None)
        self.tokens, self.dim = (0, 0) if first is None else first.shape

    def extract(self, tensor=None, item_id=None) -> FeatureMap:
        try:
            row = self.rows[str(item_id)]
        except KeyError:
            raise NotFound(f"{self.path}: no embedding for item {item_id!r}") from None
        return FeatureMap.from_tokens(row)


def extract(extractor, tensor, item_id=None) -> FeatureMap:
    return extractor.extract(tensor, item_id)


# ---------------------------------------------------------------- FDEB


def write_embeddings(path, rows: dict[str, np.ndarray]) -> None:
    """Write ``item_id -> T x D`` rows; values are stored as float32."""
    shapes = {np.shape(v) for v in rows.values()}
    if len(shapes) > 1:
        raise InvalidArgument(f"inconsistent row shapes: {sorted(shapes)}")
    t, d = shapes.pop() if shapes else (0, 0)
    parts = [_HEADER.pack(FDEB_MAGIC, FDEB_VERSION, t, d, len(rows))]
    for key, value in rows.items():
        raw = str(key).encode("utf-8")
        if len(raw) > 0xFFFF:
            raise InvalidArgument("item id longer than 65535 bytes")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(b"".join(parts))


def load_embeddings(path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, t, d, count = _HEADER.unpack_from(buf, 0)
    if magic != FDEB_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FDEB_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = 4 * t * d
    pos = _HEADER.size
    rows = {}
    for _ in range(count):
        if pos + 2 > len(buf):
            raise FormatError(f"{path}: truncated row header")
        (n,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if pos + n + payload > len(buf):
            raise FormatError(f"{path}: truncated row")
        try:
            key = buf[pos : pos + n].decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{path}: item id is not UTF-8") from None
        pos += n
        rows[key] = np.frombuffer(buf, dtype="<f4", count=t * d, offset=pos).reshape(t, d).copy()
        pos += payload
    if pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - pos} trailing bytes")
    return rows


# ---------------------------------------------------------------- head


@dataclass
class ClassifierHead:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = float(self.bias)
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise InvalidArgument("head parameters must be finite")

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def head_logit(head: ClassifierHead, pooled) -> float:
    pooled = np.asarray(pooled, dtype=np.float64)
    if pooled.shape != head.weights.shape:
        raise InvalidArgument(f"dim mismatch: head {head.weights.shape}, features {pooled.shape}")
    return float(head.weights @ pooled + head.bias)


def head_forward(head: ClassifierHead, pooled) -> float:
    """Probability that the input is AI-generated: sigmoid(w . pooled + b)."""
    return float(expit(head_logit(head, pooled)))
