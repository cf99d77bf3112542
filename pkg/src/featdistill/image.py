"""Pixel rasters, value-range helpers, PNG I/O and the seeded generator.

Images are ``float64`` arrays of shape ``(height, width, channels)`` with
``channels`` in ``{1, 3}`` and samples in ``[0, 1]``.  Every public operation
in the package returns a fresh array in that layout.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

from featdistill.errors import InvalidArgument

MASK64 = (1 << 64) - 1

# +inf is the PSNR sentinel for identical images.
PSNR_IDENTICAL = math.inf


def as_image(data) -> np.ndarray:
    """Validate ``data`` as an image buffer and return it as float64 HxWxC."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise InvalidArgument(f"image must be HxWxC, got shape {arr.shape}")
    h, w, c = arr.shape
    if h < 1 or w < 1:
        raise InvalidArgument(f"image dimensions must be >= 1, got {w}x{h}")
    if c not in (1, 3):
        raise InvalidArgument(f"channel count must be 1 or 3, got {c}")
    return arr


def new_constant_image(width: int, height: int, channels: int, value: float) -> np.ndarray:
    if width < 1 or height < 1:
        raise InvalidArgument(f"dimensions must be >= 1, got {width}x{height}")
    if channels not in (1, 3):
        raise InvalidArgument(f"channel count must be 1 or 3, got {channels}")
    if not 0.0 <= value <= 1.0:
        raise InvalidArgument(f"value must lie in [0, 1], got {value}")
    return np.full((height, width, channels), float(value), dtype=np.float64)


def clamp(img) -> np.ndarray:
    return np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0; ``inf`` when a == b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(1.0 / mse)


def to_uint8(img) -> np.ndarray:
    return np.round(clamp(img) * 255.0).astype(np.uint8)


def from_uint8(arr) -> np.ndarray:
    return as_image(np.asarray(arr, dtype=np.float64) / 255.0)


def load_png(path) -> np.ndarray:
    """Load an 8-bit image file; palette/alpha images are converted to RGB."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    return from_uint8(arr)


def save_png(img, path) -> None:
    data = to_uint8(as_image(img))
    if data.shape[2] == 1:
        pil = Image.fromarray(data[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(data, mode="RGB")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    # Fixed encoder settings keep re-encoding byte-stable.
    pil.save(path, format="PNG", optimize=False, compress_level=6)


def to_rgb(img) -> np.ndarray:
    """Replicate a grayscale image to three channels."""
    img = as_image(img)
    if img.shape[2] == 3:
        return img
    return np.repeat(img, 3, axis=2)


def luminance(img) -> np.ndarray:
    """Rec. 601 luma, shape HxWx1."""
    img = as_image(img)
    if img.shape[2] == 1:
        return img.copy()
    return (0.299 * img[:, :, 0] + 0.587 * img[:, :, 1] + 0.114 * img[:, :, 2])[:, :, None]


def _axis_weights(n_in: int, n_out: int):
    # Half-pixel centre convention, edge replication.
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_bilinear(img, height: int, width: int) -> np.ndarray:
    img = as_image(img)
    h, w, _ = img.shape
    if height < 1 or width < 1:
        raise InvalidArgument(f"target size must be >= 1, got {width}x{height}")
    if (h, w) == (height, width):
        return img.copy()
    y0, y1, fy = _axis_weights(h, height)
    x0, x1, fx = _axis_weights(w, width)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1.0 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1.0 - fx) + img[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def mix64(base: int, index: int) -> int:
    """Derive a child seed from ``(base, index)`` with the SplitMix64 finalizer."""
    z = (int(base) + 0x9E3779B97F4A7C15 * (int(index) + 1)) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SeededRng:
    """Deterministic random stream backed by the counter-based Philox generator.

    The same seed gives the same stream on every platform.  Streams are single
    owner; parallel work derives children with :meth:`child` instead of
    sharing one instance.
    """

    algorithm = "philox4x64"

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def child(self, index: int) -> SeededRng:
        return SeededRng(mix64(self.seed, index))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def poisson(self, lam, size=None):
        return self._gen.poisson(lam, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def next_u64(self) -> int:
        return int(self._gen.integers(0, 1 << 64, dtype=np.uint64))

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"
