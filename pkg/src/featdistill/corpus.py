"""Procedural image corpora.

``natural_corpus`` produces images with a roughly 1/f amplitude spectrum, soft
occluding shapes and a few specular highlights, which is close enough to
photographs for PSNR-based severity checks.  ``toy_image`` adds a generator
fingerprint (periodic upsampling residue) for the toy detection task.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from featdistill.image import SeededRng, from_uint8, mix64, to_uint8


def _pink_field(h, w, rng, alpha=1.8):
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    f = np.sqrt(fy**2 + fx**2)
    f[0, 0] = 1.0
    amp = f ** (-alpha / 2.0)
    amp[0, 0] = 0.0
    phase = rng.uniform(0.0, 2.0 * np.pi, amp.shape)
    field = np.fft.irfft2(amp * np.exp(1j * phase), s=(h, w))
    field -= field.mean()
    return field / (field.std() + 1e-12)


def natural_image(size: int, seed: int) -> np.ndarray:
    """One size x size RGB image, 8-bit quantized, deterministic in ``seed``."""
    rng = SeededRng(seed)
    h = w = int(size)
    base = rng.uniform(0.25, 0.65, 3)
    img = np.empty((h, w, 3))
    shared = _pink_field(h, w, rng)
    for c in range(3):
        own = _pink_field(h, w, rng)
        img[:, :, c] = base[c] + 0.12 * (0.8 * shared + 0.4 * own)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry, rx = rng.uniform(0.1, 0.35) * h, rng.uniform(0.1, 0.35) * w
        d = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
        edge = expit(-(d - 1.0) * rng.uniform(4.0, 20.0))
        colour = rng.uniform(0.05, 0.95, 3)
        img = img * (1.0 - edge[:, :, None]) + colour[None, None, :] * edge[:, :, None]
    for _ in range(int(rng.integers(1, 3))):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        spot = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * (0.03 * h) ** 2))
        img = img + 0.8 * spot[:, :, None]
    return from_uint8(to_uint8(img))


def natural_corpus(count: int = 20, size: int = 64, seed: int = 2024) -> list[np.ndarray]:
    return [natural_image(size, mix64(seed, i)) for i in range(count)]


def toy_image(size: int, label: int, seed: int, artifact: float = 0.06) -> np.ndarray:
    """Toy real (label 0) or generated (label 1) image.

    Generated images are smoother and carry a faint 2-pixel checkerboard,
    the classic transposed-convolution residue.
    """
    rng = SeededRng(mix64(seed, 7 + label))
    img = natural_image(size, rng.next_u64())
    if label:
        from featdistill.distortions.ops import gaussian_blur

        img = gaussian_blur(img, sigma=0.8)
        yy, xx = np.mgrid[0:size, 0:size]
        checker = np.where((yy + xx) % 2 == 0, 1.0, -1.0)[:, :, None]
        img = img + artifact * checker
    return from_uint8(to_uint8(img))
