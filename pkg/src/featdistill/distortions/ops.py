"""Degradation operators.

Every operator takes an HxWxC float image in [0, 1] and keyword parameters,
and returns a new image of the same shape.  Operators that need randomness
take an explicit ``rng`` (:class:`~featdistill.image.SeededRng`) so that the
result is a pure function of ``(image, params, seed)``.

Convolutions use reflect edges; resampling is bilinear with edge replication.
"""

from __future__ import annotations

import io
import math

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy import ndimage

from featdistill.errors import InvalidArgument
from featdistill.image import as_image, clamp, luminance, resize_bilinear, to_uint8

AIRLIGHT = 0.9


def _require(cond, msg):
    if not cond:
        raise InvalidArgument(msg)


def _convolve(img, kernel):
    return ndimage.convolve(img, kernel[:, :, None], mode="reflect")


def _gaussian(img, sigma):
    return ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0.0), mode="reflect")


def _warp(img, src_y, src_x):
    """Sample ``img`` at fractional source coordinates (bilinear, replicate edges)."""
    out = np.empty(src_y.shape + (img.shape[2],), dtype=np.float64)
    coords = np.stack([src_y, src_x])
    for c in range(img.shape[2]):
        out[:, :, c] = ndimage.map_coordinates(img[:, :, c], coords, order=1, mode="nearest")
    return out


def _grid(h, w):
    return np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")


def _rgb_to_ycc(img):
    r, g, b = img[:, :, 0], img[:, :, 1], img[:, :, 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    return y, (b - y) * 0.564, (r - y) * 0.713


def _ycc_to_rgb(y, cb, cr):
    r = y + cr / 0.713
    b = y + cb / 0.564
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return np.stack([r, g, b], axis=2)


# ---------------------------------------------------------------- blur


def line_kernel(length: int, angle: float) -> np.ndarray:
    """Normalized line kernel of ``length`` taps rasterized at ``angle`` degrees."""
    length = int(length)
    _require(length >= 1, f"kernel_len must be >= 1, got {length}")
    if length == 1:
        return np.ones((1, 1))
    size = length if length % 2 else length + 1
    c = size // 2
    theta = math.radians(angle)
    t = np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, length)
    xs = np.rint(c + t * math.cos(theta)).astype(int)
    ys = np.rint(c - t * math.sin(theta)).astype(int)
    k = np.zeros((size, size))
    np.add.at(k, (ys, xs), 1.0)
    return k / k.sum()


def disk_kernel(radius: float) -> np.ndarray:
    r = int(math.ceil(radius))
    if r == 0:
        return np.ones((1, 1))
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    k = (xx**2 + yy**2 <= radius**2 + 1e-9).astype(np.float64)
    return k / k.sum()


def gaussian_blur(img, *, sigma):
    _require(sigma >= 0, f"sigma must be >= 0, got {sigma}")
    img = as_image(img)
    if sigma == 0:
        return img.copy()
    return _gaussian(img, sigma)


def motion_blur(img, *, kernel_len, angle):
    img = as_image(img)
    k = line_kernel(kernel_len, angle)
    if k.size == 1:
        return img.copy()
    return _convolve(img, k)


def defocus_blur(img, *, radius):
    _require(radius >= 0, f"radius must be >= 0, got {radius}")
    img = as_image(img)
    k = disk_kernel(radius)
    if k.size == 1:
        return img.copy()
    return _convolve(img, k)


def atmospheric_blur(img, *, sigma):
    """Long-tailed turbulence blur: a 60/40 mixture of Gaussians at sigma and 3*sigma."""
    _require(sigma >= 0, f"sigma must be >= 0, got {sigma}")
    img = as_image(img)
    if sigma == 0:
        return img.copy()
    return 0.6 * _gaussian(img, sigma) + 0.4 * _gaussian(img, 3.0 * sigma)


def zoom_blur(img, *, zoom):
    _require(zoom >= 0, f"zoom must be >= 0, got {zoom}")
    img = as_image(img)
    h, w, _ = img.shape
    if zoom == 0:
        return img.copy()
    yy, xx = _grid(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    steps = 8
    acc = np.zeros_like(img)
    for z in np.linspace(1.0, 1.0 + zoom, steps):
        acc += _warp(img, cy + (yy - cy) / z, cx + (xx - cx) / z)
    return acc / steps


# ---------------------------------------------------------------- noise


def gaussian_noise(img, *, sigma, rng):
    _require(sigma >= 0, f"sigma must be >= 0, got {sigma}")
    img = as_image(img)
    noise = rng.normal(0.0, 1.0, img.shape)
    if sigma == 0:
        return img.copy()
    return clamp(img + sigma * noise)


def poisson_noise(img, *, scale, rng):
    """Shot noise; ``scale`` is the inverse photon count per unit intensity."""
    _require(scale >= 0, f"scale must be >= 0, got {scale}")
    img = as_image(img)
    if scale == 0:
        return img.copy()
    return clamp(rng.poisson(img / scale) * scale)


def iso_noise(img, *, sigma, rng):
    """High-ISO noise: signal-dependent luminance grain plus colour speckle."""
    _require(sigma >= 0, f"sigma must be >= 0, got {sigma}")
    img = as_image(img)
    h, w, c = img.shape
    grain = rng.normal(0.0, 1.0, (h, w, 1))
    speckle = rng.normal(0.0, 1.0, (h, w, c))
    if sigma == 0:
        return img.copy()
    lum = luminance(img)
    noise = sigma * np.sqrt(lum + 0.05) * grain + 0.5 * sigma * speckle
    return clamp(img + noise)


def salt_pepper(img, *, amount, rng):
    _require(0 <= amount <= 1, f"amount must lie in [0, 1], got {amount}")
    img = as_image(img)
    h, w, _ = img.shape
    u = rng.random((h, w))
    salt = rng.random((h, w)) < 0.5
    out = img.copy()
    hit = u < amount
    out[hit & salt] = 1.0
    out[hit & ~salt] = 0.0
    return out


def banding_noise(img, *, amplitude, rng):
    """Row-wise readout banding: per-row offsets plus a low-frequency stripe."""
    _require(amplitude >= 0, f"amplitude must be >= 0, got {amplitude}")
    img = as_image(img)
    h = img.shape[0]
    rows = rng.normal(0.0, 1.0, h)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    if amplitude == 0:
        return img.copy()
    stripe = np.sin(2.0 * math.pi * np.arange(h) / max(h / 6.0, 2.0) + phase)
    offsets = amplitude * (0.7 * rows + 0.7 * stripe)
    return clamp(img + offsets[:, None, None])


# ---------------------------------------------------------------- compression


def _jpeg_roundtrip(img, quality, subsampling):
    data = to_uint8(img)
    if data.shape[2] == 1:
        pil = Image.fromarray(data[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(data, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="JPEG", quality=int(quality), subsampling=subsampling, optimize=False)
    buf.seek(0)
    with Image.open(buf) as dec:
        arr = np.asarray(dec, dtype=np.float64) / 255.0
    return as_image(arr)


def jpeg_compress(img, *, quality):
    _require(1 <= quality <= 100, f"quality must lie in 1..100, got {quality}")
    return _jpeg_roundtrip(as_image(img), quality, subsampling=0)


def _haar_forward(x):
    a = (x[0::2] + x[1::2]) / 2.0
    d = (x[0::2] - x[1::2]) / 2.0
    ll = (a[:, 0::2] + a[:, 1::2]) / 2.0
    lh = (a[:, 0::2] - a[:, 1::2]) / 2.0
    hl = (d[:, 0::2] + d[:, 1::2]) / 2.0
    hh = (d[:, 0::2] - d[:, 1::2]) / 2.0
    return ll, (lh, hl, hh)


def _haar_inverse(ll, details):
    lh, hl, hh = details
    h2, w2 = ll.shape[:2]
    a = np.empty((h2, 2 * w2) + ll.shape[2:])
    d = np.empty_like(a)
    a[:, 0::2], a[:, 1::2] = ll + lh, ll - lh
    d[:, 0::2], d[:, 1::2] = hl + hh, hl - hh
    x = np.empty((2 * h2,) + a.shape[1:])
    x[0::2], x[1::2] = a + d, a - d
    return x


def jpeg2000_wavelet(img, *, step, levels=3):
    """Wavelet-domain quantization in the style of JPEG 2000 (Haar, 3 levels)."""
    _require(step >= 0, f"step must be >= 0, got {step}")
    img = as_image(img)
    if step == 0:
        return img.copy()
    h, w, _ = img.shape
    m = 1 << levels
    ph, pw = (-h) % m, (-w) % m
    x = np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="reflect" if min(h, w) > 1 else "edge")
    stack = []
    for _ in range(levels):
        x, det = _haar_forward(x)
        stack.append(tuple(np.round(d / step) * step for d in det))
    for det in reversed(stack):
        x = _haar_inverse(x, det)
    return clamp(x[:h, :w])


def ringing(img, *, cutoff):
    """Ideal low-pass in the frequency domain; the hard cutoff produces Gibbs ringing.

    ``cutoff`` is the retained band as a fraction of Nyquist; 1 keeps everything.
    """
    _require(0 < cutoff <= 1, f"cutoff must lie in (0, 1], got {cutoff}")
    img = as_image(img)
    if cutoff == 1:
        return img.copy()
    h, w, _ = img.shape
    fy = np.abs(np.fft.fftfreq(h))[:, None]
    fx = np.abs(np.fft.rfftfreq(w))[None, :]
    mask = ((fy <= 0.5 * cutoff) & (fx <= 0.5 * cutoff)).astype(np.float64)
    spec = np.fft.rfft2(img, axes=(0, 1))
    out = np.fft.irfft2(spec * mask[:, :, None], s=(h, w), axes=(0, 1))
    return clamp(out)


def _block_mean(x, f):
    h, w = x.shape
    ph, pw = (-h) % f, (-w) % f
    p = np.pad(x, ((0, ph), (0, pw)), mode="edge")
    hb, wb = p.shape[0] // f, p.shape[1] // f
    means = p.reshape(hb, f, wb, f).mean(axis=(1, 3))
    return np.repeat(np.repeat(means, f, axis=0), f, axis=1)[:h, :w]


def chroma_subsample(img, *, factor):
    """Average chroma over ``factor``-sized blocks; blocky colour bleeding."""
    factor = int(factor)
    _require(factor >= 1, f"factor must be >= 1, got {factor}")
    img = as_image(img)
    if factor == 1 or img.shape[2] == 1:
        return img.copy()
    y, cb, cr = _rgb_to_ycc(img)
    return clamp(_ycc_to_rgb(y, _block_mean(cb, factor), _block_mean(cr, factor)))


# ---------------------------------------------------------------- colour


def color_cast(img, *, gains):
    img = as_image(img)
    _require(img.shape[2] == 3, f"color_cast needs 3 channels, got {img.shape[2]}")
    gains = np.asarray(gains, dtype=np.float64)
    _require(gains.shape == (3,), "gains must be a triple")
    _require(bool(np.all(gains >= 0)), "gains must be >= 0")
    return clamp(img * gains[None, None, :])


def saturation_shift(img, *, factor):
    _require(factor >= 0, f"factor must be >= 0, got {factor}")
    img = as_image(img)
    if factor == 1 or img.shape[2] == 1:
        return img.copy()
    lum = luminance(img)
    return clamp(lum + factor * (img - lum))


def contrast_shift(img, *, factor):
    _require(factor >= 0, f"factor must be >= 0, got {factor}")
    img = as_image(img)
    if factor == 1:
        return img.copy()
    mean = img.mean()
    return clamp(mean + factor * (img - mean))


def gamma_shift(img, *, gamma):
    _require(gamma > 0, f"gamma must be > 0, got {gamma}")
    img = as_image(img)
    if gamma == 1:
        return img.copy()
    return clamp(img**gamma)


def posterize(img, *, levels):
    levels = int(levels)
    _require(levels >= 2, f"levels must be >= 2, got {levels}")
    img = as_image(img)
    return np.round(img * (levels - 1)) / (levels - 1)


# ---------------------------------------------------------------- geometric


def _homography(src, dst):
    """3x3 matrix mapping ``src`` points onto ``dst`` points (4 correspondences)."""
    a = []
    b = []
    for (x, y), (u, v) in zip(src, dst):
        a.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        a.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        b.extend([u, v])
    h = np.linalg.solve(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
    return np.append(h, 1.0).reshape(3, 3)


def perspective_corners(shape, corner_jitter, rng):
    """Jittered destination corners (x, y), each displaced <= jitter * min(W, H)."""
    h, w = shape[:2]
    src = np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]], dtype=np.float64)
    radius = rng.random(4) * corner_jitter * min(w, h)
    theta = rng.uniform(0.0, 2.0 * math.pi, 4)
    dst = src + np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    return src, dst


def perspective_warp(img, *, corner_jitter, rng):
    _require(0 <= corner_jitter <= 0.25, f"corner_jitter must lie in [0, 0.25], got {corner_jitter}")
    img = as_image(img)
    h, w, _ = img.shape
    src, dst = perspective_corners(img.shape, corner_jitter, rng)
    # Output pixel positions are the warped frame; pull from the source.
    hm = _homography(dst, src)
    yy, xx = _grid(h, w)
    den = hm[2, 0] * xx + hm[2, 1] * yy + hm[2, 2]
    sx = (hm[0, 0] * xx + hm[0, 1] * yy + hm[0, 2]) / den
    sy = (hm[1, 0] * xx + hm[1, 1] * yy + hm[1, 2]) / den
    return _warp(img, sy, sx)


def _radial(img, scale_fn):
    h, w, _ = img.shape
    yy, xx = _grid(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    norm = max(math.hypot(cy, cx), 1.0)
    dy, dx = (yy - cy) / norm, (xx - cx) / norm
    s = scale_fn(dy * dy + dx * dx)
    return _warp(img, cy + dy * s * norm, cx + dx * s * norm)


def barrel_distortion(img, *, strength):
    _require(strength >= 0, f"strength must be >= 0, got {strength}")
    img = as_image(img)
    return _radial(img, lambda r2: 1.0 + strength * r2)


def pincushion_distortion(img, *, strength):
    _require(strength >= 0, f"strength must be >= 0, got {strength}")
    img = as_image(img)
    return _radial(img, lambda r2: 1.0 / (1.0 + strength * r2))


def lens_distortion(img, *, k):
    """Signed single-coefficient radial model; k > 0 barrel, k < 0 pincushion."""
    img = as_image(img)
    if k >= 0:
        return barrel_distortion(img, strength=k)
    return pincushion_distortion(img, strength=-k)


def resize_down_up(img, *, scale):
    _require(0 < scale <= 1, f"scale must lie in (0, 1], got {scale}")
    img = as_image(img)
    h, w, _ = img.shape
    small = resize_bilinear(img, max(1, round(h * scale)), max(1, round(w * scale)))
    return resize_bilinear(small, h, w)


def rotation_crop(img, *, angle):
    """Rotate about the centre and zoom just enough that no border shows."""
    img = as_image(img)
    h, w, _ = img.shape
    t = math.radians(angle)
    c, s = abs(math.cos(t)), abs(math.sin(t))
    zoom = max((w * c + h * s) / w, (w * s + h * c) / h)
    yy, xx = _grid(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    dy, dx = yy - cy, xx - cx
    ct, st = math.cos(t), math.sin(t)
    sx = cx + (ct * dx + st * dy) / zoom
    sy = cy + (-st * dx + ct * dy) / zoom
    return _warp(img, sy, sx)


# ---------------------------------------------------------------- environmental


def diamond_square(size_exp: int, rng, roughness: float = 0.55) -> np.ndarray:
    """Plasma fractal on a (2**size_exp + 1)^2 grid, unnormalized."""
    n = (1 << size_exp) + 1
    a = np.zeros((n, n))
    a[0, 0], a[0, -1], a[-1, 0], a[-1, -1] = rng.uniform(-1.0, 1.0, 4)
    step, scale = n - 1, 1.0
    while step > 1:
        half = step // 2
        centre = (a[0:-1:step, 0:-1:step] + a[step::step, 0:-1:step]
                  + a[0:-1:step, step::step] + a[step::step, step::step]) / 4.0
        a[half::step, half::step] = centre + rng.uniform(-scale, scale, centre.shape)
        p = np.pad(a, half, mode="constant", constant_values=np.nan)
        for r0, c0 in ((0, half), (half, 0)):
            rows = np.arange(r0, n, step)
            cols = np.arange(c0, n, step)
            rr, cc = np.meshgrid(rows + half, cols + half, indexing="ij")
            nb = np.stack([p[rr - half, cc], p[rr + half, cc], p[rr, cc - half], p[rr, cc + half]])
            mean = np.nanmean(nb, axis=0)
            a[np.ix_(rows, cols)] = mean + rng.uniform(-scale, scale, mean.shape)
        step, scale = half, scale * roughness
    return a


def depth_field(h, w, rng) -> np.ndarray:
    """Seeded plasma depth in [0.1, 1]; strictly positive so fog always attenuates."""
    exp = max(1, math.ceil(math.log2(max(h, w, 2) - 1)))
    p = diamond_square(exp, rng)[:h, :w]
    lo, hi = p.min(), p.max()
    d = np.ones((h, w)) if hi - lo < 1e-12 else (p - lo) / (hi - lo)
    return 0.1 + 0.9 * d


def fog(img, *, density, rng):
    _require(0 <= density <= 1, f"density must lie in [0, 1], got {density}")
    img = as_image(img)
    h, w, _ = img.shape
    d = depth_field(h, w, rng)
    t = np.exp(-density * d)[:, :, None]
    return clamp((1.0 - t) * AIRLIGHT + t * img)


def rain(img, *, density, rng):
    _require(0 <= density <= 1, f"density must lie in [0, 1], got {density}")
    img = as_image(img)
    h, w, _ = img.shape
    drops = (rng.random((h, w)) < density).astype(np.float64)
    length = max(3, h // 8)
    k = line_kernel(length, 75.0) * length
    m = np.clip(ndimage.convolve(drops, k, mode="constant"), 0.0, 1.0) * 0.7
    m = m[:, :, None]
    return clamp(img * (1.0 - m) + 0.85 * m)


def snow(img, *, density, rng):
    _require(0 <= density <= 1, f"density must lie in [0, 1], got {density}")
    img = as_image(img)
    h, w, _ = img.shape
    flakes = (rng.random((h, w)) < density).astype(np.float64)
    m = np.clip(ndimage.gaussian_filter(flakes * 4.0, 0.7, mode="constant"), 0.0, 1.0)[:, :, None]
    return clamp(img + (1.0 - img) * m)


def shadow(img, *, strength, rng):
    """Soft-edged half-plane shadow across a seeded line."""
    _require(0 <= strength <= 1, f"strength must lie in [0, 1], got {strength}")
    img = as_image(img)
    h, w, _ = img.shape
    theta = rng.uniform(0.0, 2.0 * math.pi)
    oy, ox = rng.uniform(0.25, 0.75) * h, rng.uniform(0.25, 0.75) * w
    yy, xx = _grid(h, w)
    dist = (xx - ox) * math.cos(theta) + (yy - oy) * math.sin(theta)
    soft = max(min(h, w) / 16.0, 0.5)
    mask = (1.0 / (1.0 + np.exp(-dist / soft)))[:, :, None]
    return clamp(img * (1.0 - strength * mask))


# ---------------------------------------------------------------- sensor


def sensor_blooming(img, *, threshold, spread):
    """Excess above ``threshold`` leaks into neighbours through a Gaussian of std ``spread``.

    The kernel is peak-normalized, so a source pixel receives exactly its own
    excess back and stays unchanged; only neighbours brighten.
    """
    _require(0 < threshold <= 1, f"threshold must lie in (0, 1], got {threshold}")
    _require(spread >= 0, f"spread must be >= 0, got {spread}")
    img = as_image(img)
    excess = np.maximum(img - threshold, 0.0)
    if spread == 0 or not excess.any():
        return img.copy()
    r = int(math.ceil(3.0 * spread))
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * spread * spread))
    bloom = ndimage.correlate1d(excess, k, axis=0, mode="constant")
    bloom = ndimage.correlate1d(bloom, k, axis=1, mode="constant")
    return clamp(img + np.maximum(bloom - excess, 0.0))


def vignette(img, *, strength):
    _require(0 <= strength <= 1, f"strength must lie in [0, 1], got {strength}")
    img = as_image(img)
    h, w, _ = img.shape
    yy, xx = _grid(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    r2 = (yy - cy) ** 2 + (xx - cx) ** 2
    r2max = max(cy * cy + cx * cx, 1.0)
    return clamp(img * (1.0 - strength * r2 / r2max)[:, :, None])


def hot_pixels(img, *, fraction, rng):
    _require(0 <= fraction <= 1, f"fraction must lie in [0, 1], got {fraction}")
    img = as_image(img)
    h, w, c = img.shape
    mask = rng.random((h, w)) < fraction
    values = rng.uniform(0.8, 1.0, (h, w, c))
    return np.where(mask[:, :, None], values, img)


# ---------------------------------------------------------------- occlusion / overlay


def occlusion_rects(shape, count, max_frac, rng):
    """Seeded rectangles as ``(y, x, height, width, gray)`` tuples."""
    h, w = shape[:2]
    max_h = max(1, int(math.floor(max_frac * h)))
    max_w = max(1, int(math.floor(max_frac * w)))
    rects = []
    for _ in range(int(count)):
        rh = int(rng.integers(1, max_h + 1))
        rw = int(rng.integers(1, max_w + 1))
        y = int(rng.integers(0, h - rh + 1))
        x = int(rng.integers(0, w - rw + 1))
        rects.append((y, x, rh, rw, float(rng.random())))
    return rects


def random_occlusion(img, *, count, max_frac, rng):
    _require(count >= 1, f"count must be >= 1, got {count}")
    _require(0 < max_frac <= 0.5, f"max_frac must lie in (0, 0.5], got {max_frac}")
    img = as_image(img)
    out = img.copy()
    for y, x, rh, rw, gray in occlusion_rects(img.shape, count, max_frac, rng):
        out[y : y + rh, x : x + rw] = gray
    return out


_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789@#"


def _font(size):
    try:
        return ImageFont.load_default(size=size)
    except TypeError:  # Pillow < 10.1
        return ImageFont.load_default()


def text_overlay(img, *, count, opacity, rng):
    _require(count >= 0, f"count must be >= 0, got {count}")
    _require(0 <= opacity <= 1, f"opacity must lie in [0, 1], got {opacity}")
    img = as_image(img)
    h, w, _ = img.shape
    canvas = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(canvas)
    font = _font(max(8, h // 6))
    colours = []
    for _ in range(int(count)):
        n = int(rng.integers(3, 9))
        text = "".join(_ALPHABET[int(i)] for i in rng.integers(0, len(_ALPHABET), n))
        x = int(rng.integers(0, max(1, w - w // 4)))
        y = int(rng.integers(0, max(1, h - h // 6)))
        draw.text((x, y), text, fill=255, font=font)
        colours.append(float(rng.random()))
    if opacity == 0 or count == 0:
        return img.copy()
    m = np.asarray(canvas, dtype=np.float64)[:, :, None] / 255.0 * opacity
    colour = 1.0 if not colours else (1.0 if np.mean(colours) > 0.3 else 0.0)
    return clamp(img * (1.0 - m) + colour * m)


def watermark_grid(img, *, opacity, spacing):
    _require(0 <= opacity <= 1, f"opacity must lie in [0, 1], got {opacity}")
    spacing = int(spacing)
    _require(spacing >= 2, f"spacing must be >= 2, got {spacing}")
    img = as_image(img)
    if opacity == 0:
        return img.copy()
    h, w, _ = img.shape
    yy, xx = np.mgrid[0:h, 0:w]
    lines = ((xx + yy) % spacing == 0) | ((xx - yy) % spacing == 0)
    m = (lines.astype(np.float64) * opacity)[:, :, None]
    return clamp(img * (1.0 - m) + m)


def screenshot_border(img, *, border):
    """Shrink content into a UI-like frame with a dark status bar on top."""
    _require(0 <= border <= 0.4, f"border must lie in [0, 0.4], got {border}")
    img = as_image(img)
    if border == 0:
        return img.copy()
    h, w, c = img.shape
    top = max(1, round(border * h))
    bottom = max(0, round(border * h / 3))
    side = max(0, round(border * w / 3))
    ih, iw = h - top - bottom, w - 2 * side
    if ih < 1 or iw < 1:
        return np.full_like(img, 0.93)
    out = np.full((h, w, c), 0.93)
    out[:top] = 0.2
    out[top : top + ih, side : side + iw] = resize_bilinear(img, ih, iw)
    return out


# ---------------------------------------------------------------- official-style extras


def jpeg_420(img, *, quality):
    _require(1 <= quality <= 100, f"quality must lie in 1..100, got {quality}")
    return _jpeg_roundtrip(as_image(img), quality, subsampling=2)


def jpeg_recompress(img, *, quality_first, quality_second):
    """Two lossy generations with a small rescale in between (social-media repost)."""
    img = as_image(img)
    h, w, _ = img.shape
    once = jpeg_420(img, quality=quality_first)
    shrunk = resize_bilinear(once, max(1, round(h * 0.9)), max(1, round(w * 0.9)))
    twice = jpeg_420(shrunk, quality=quality_second)
    return resize_bilinear(twice, h, w)


def color_adjust(img, *, brightness, contrast, saturation):
    img = as_image(img)
    out = clamp(img + brightness)
    out = contrast_shift(out, factor=contrast)
    return saturation_shift(out, factor=saturation)


def sharpen_filter(img, *, amount):
    """Unsharp mask; negative ``amount`` blends toward the blurred image instead."""
    img = as_image(img)
    if amount == 0:
        return img.copy()
    blurred = _gaussian(img, 1.0)
    if amount > 0:
        return clamp(img + amount * (img - blurred))
    a = min(-amount, 1.0)
    return clamp((1.0 - a) * img + a * blurred)
