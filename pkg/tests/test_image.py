import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from featdistill.errors import InvalidArgument
from featdistill.image import (
    SeededRng,
    clamp,
    load_png,
    mix64,
    new_constant_image,
    psnr,
    resize_bilinear,
    save_png,
    to_rgb,
)

finite = st.floats(-3.0, 3.0, allow_nan=False)
images = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3])),
                elements=st.floats(0.0, 1.0))


@pytest.mark.parametrize("w,h,c,v,n", [(2, 2, 1, 0.0, 4), (1, 1, 3, 1.0, 3), (3, 2, 3, 0.5, 18)])
def test_constant_image(w, h, c, v, n):
    img = new_constant_image(w, h, c, v)
    assert img.size == n
    assert img.shape == (h, w, c)
    assert np.all(img == v)


@pytest.mark.parametrize("args", [(0, 2, 1, 0.5), (2, 0, 1, 0.5), (2, 2, 2, 0.5), (2, 2, 1, 1.5)])
def test_constant_image_rejects(args):
    with pytest.raises(InvalidArgument):
        new_constant_image(*args)


def test_psnr_examples():
    a = new_constant_image(4, 3, 3, 0.3)
    assert psnr(a, a) == math.inf
    assert psnr(new_constant_image(5, 5, 1, 0.0), new_constant_image(5, 5, 1, 1.0)) == 0.0
    for shape in [(1, 1, 1), (7, 3, 3)]:
        got = psnr(np.full(shape, 0.5), np.full(shape, 0.6))
        assert got == pytest.approx(20.0, abs=1e-9)


def test_psnr_shape_mismatch():
    with pytest.raises(InvalidArgument):
        psnr(np.zeros((2, 2, 1)), np.zeros((2, 3, 1)))


def test_clamp_examples():
    np.testing.assert_array_equal(clamp(np.array([-0.2, 1.7, 0.4])), [0.0, 1.0, 0.4])


@given(arrays(np.float64, st.integers(1, 30), elements=finite))
def test_clamp_idempotent(x):
    once = clamp(x)
    np.testing.assert_array_equal(clamp(once), once)
    assert np.all((once >= 0) & (once <= 1))


@given(images, images)
def test_psnr_symmetric_and_self_inf(a, b):
    assert psnr(a, a) == math.inf
    if a.shape == b.shape:
        assert psnr(a, b) == psnr(b, a)


@settings(max_examples=25)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9), st.sampled_from([1, 3]))))
def test_png_roundtrip_bit_exact(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("png") / "x.png"
    img = data.astype(np.float64) / 255.0
    save_png(img, path)
    back = load_png(path)
    np.testing.assert_array_equal(np.round(back * 255).astype(np.uint8), data)
    np.testing.assert_array_equal(back, img)


def test_png_reencode_is_byte_stable(tmp_path, natural):
    save_png(natural, tmp_path / "a.png")
    save_png(load_png(tmp_path / "a.png"), tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_to_rgb():
    g = np.random.default_rng(0).random((3, 4, 1))
    out = to_rgb(g)
    assert out.shape == (3, 4, 3)
    for c in range(3):
        np.testing.assert_array_equal(out[:, :, c], g[:, :, 0])


def test_resize_identity_and_constant():
    img = np.random.default_rng(1).random((5, 7, 3))
    np.testing.assert_array_equal(resize_bilinear(img, 5, 7), img)
    const = np.full((5, 7, 1), 0.25)
    np.testing.assert_allclose(resize_bilinear(const, 9, 3), 0.25, atol=1e-15)


def test_resize_upsample_2x_interpolates():
    img = np.array([[0.0, 1.0]])[:, :, None]
    out = resize_bilinear(img, 1, 4)[0, :, 0]
    # half-pixel centres: source positions -0.25, 0.25, 0.75, 1.25 (edges clipped)
    np.testing.assert_allclose(out, [0.0, 0.25, 0.75, 1.0])


def test_mix64_matches_splitmix64_reference():
    # First two outputs of the reference SplitMix64 generator seeded with 0.
    assert mix64(0, 0) == 0xE220A8397B1DCDAF
    assert mix64(0, 1) == 0x6E789E6AA1B965F4


def test_seeded_rng_stream_is_pinned():
    r = SeededRng(0)
    np.testing.assert_array_equal(r.random(3), [0.014067035665647709, 0.2577672456246177, 0.47156538101528966])
    assert r.next_u64() == 1686395276220330909


@given(st.integers(0, 2**64 - 1))
@settings(max_examples=30)
def test_seeded_rng_same_seed_same_stream(seed):
    a, b = SeededRng(seed), SeededRng(seed)
    np.testing.assert_array_equal(a.normal(size=5), b.normal(size=5))
    assert a.child(3).next_u64() == b.child(3).next_u64()
