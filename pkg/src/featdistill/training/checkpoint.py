"""Binary checkpoint format.

FDCK layout (little-endian)::

    b"FDCK" | version u16 | D u32 | has_projector u8 | step u64 | config sha256 (32 bytes)
    weights D x f64 | bias f64 | projector D*D x f64 (row-major, if present)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from featdistill.errors import FormatError, InvalidArgument
from featdistill.features import ClassifierHead

FDCK_MAGIC = b"FDCK"
FDCK_VERSION = 1
_HEADER = struct.Struct("<4sHIBQ32s")


@dataclass
class Checkpoint:
    head: ClassifierHead
    projector: np.ndarray | None = None
    step: int = 0
    config_hash: str = "0" * 64

    def __post_init__(self):
        if self.projector is not None:
            self.projector = np.asarray(self.projector, dtype=np.float64)
            d = self.head.dim
            if self.projector.shape != (d, d):
                raise InvalidArgument(f"projector must be {d}x{d}, got {self.projector.shape}")
            if not np.all(np.isfinite(self.projector)):
                raise InvalidArgument("projector has non-finite entries")

    @property
    def dim(self) -> int:
        return self.head.dim

    def projection(self) -> np.ndarray:
        return np.eye(self.dim) if self.projector is None else self.projector

    def to_bytes(self) -> bytes:
        d = self.dim
        has = self.projector is not None
        parts = [
            _HEADER.pack(FDCK_MAGIC, FDCK_VERSION, d, int(has), int(self.step), bytes.fromhex(self.config_hash)),
            np.ascontiguousarray(self.head.weights, dtype="<f8").tobytes(),
            struct.pack("<d", self.head.bias),
        ]
        if has:
            parts.append(np.ascontiguousarray(self.projector, dtype="<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> Checkpoint:
        if len(buf) < _HEADER.size:
            raise FormatError("checkpoint: truncated header")
        magic, version, d, has, step, digest = _HEADER.unpack_from(buf, 0)
        if magic != FDCK_MAGIC:
            raise FormatError(f"checkpoint: bad magic {magic!r}")
        if version != FDCK_VERSION:
            raise FormatError(f"checkpoint: unsupported version {version}")
        expected = _HEADER.size + 8 * d + 8 + (8 * d * d if has else 0)
        if len(buf) != expected:
            raise FormatError(f"checkpoint: expected {expected} bytes, got {len(buf)}")
        pos = _HEADER.size
        w = np.frombuffer(buf, dtype="<f8", count=d, offset=pos).astype(np.float64)
        pos += 8 * d
        (b,) = struct.unpack_from("<d", buf, pos)
        pos += 8
        proj = None
        if has:
            proj = np.frombuffer(buf, dtype="<f8", count=d * d, offset=pos).reshape(d, d).astype(np.float64)
        return cls(ClassifierHead(w, b), proj, step, digest.hex())


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(ckpt.to_bytes())


def read_checkpoint(path) -> Checkpoint:
    return Checkpoint.from_bytes(Path(path).read_bytes())
