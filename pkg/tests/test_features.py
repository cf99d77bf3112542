import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from featdistill.errors import FormatError, InvalidArgument, NotFound
from featdistill.features import (
    ClassifierHead,
    EmbeddingFileExtractor,
    FeatureMap,
    SyntheticExtractor,
    head_forward,
    load_embeddings,
    patchify,
    write_embeddings,
)


def test_synthetic_deterministic_and_bounded():
    t = np.random.default_rng(0).normal(size=(32, 32, 3))
    a = SyntheticExtractor(7, 32, 12).extract(t)
    b = SyntheticExtractor(7, 32, 12).extract(t)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.values.shape == (4, 12)
    assert np.all(np.abs(a.values) < 1)
    c = SyntheticExtractor(8, 32, 12).extract(t)
    assert not np.array_equal(a.values, c.values)


def test_synthetic_shape_mismatch():
    ex = SyntheticExtractor(0, 32, 4)
    with pytest.raises(InvalidArgument):
        ex.extract(np.zeros((48, 48, 3)))
    with pytest.raises(InvalidArgument):
        SyntheticExtractor(0, 30, 4)


def test_synthetic_matches_direct_formula():
    ex = SyntheticExtractor(3, 32, 5)
    t = np.random.default_rng(1).normal(size=(32, 32, 3))
    # patch (row 1, col 0) covers rows 16..31, cols 0..15
    p = t[16:32, 0:16].reshape(-1)
    np.testing.assert_allclose(ex.extract(t).values[2], np.tanh(ex.weight @ p + ex.bias), rtol=0, atol=1e-12)


def test_patchify_order():
    t = np.arange(32 * 32 * 1, dtype=float).reshape(32, 32, 1)
    p = patchify(t, 16)
    assert p.shape == (4, 256)
    np.testing.assert_array_equal(p[1], t[0:16, 16:32].reshape(-1))


@settings(max_examples=20)
@given(st.integers(0, 31), st.integers(0, 31), st.integers(0, 2), st.floats(-0.5, 0.5).filter(lambda e: e != 0))
def test_synthetic_lipschitz_per_pixel(y, x, c, eps):
    ex = SyntheticExtractor(11, 32, 6)
    t = np.random.default_rng(2).normal(size=(32, 32, 3))
    t2 = t.copy()
    t2[y, x, c] += eps
    delta = np.abs(ex.extract(t2).values - ex.extract(t).values)
    bound = np.max(np.sum(np.abs(ex.weight), axis=1)) * abs(eps)
    assert np.all(delta <= bound + 1e-12)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-1e3, 1e3)))
def test_pooled_is_token_mean(values):
    fm = FeatureMap.from_tokens(values)
    np.testing.assert_allclose(fm.pooled, values.mean(axis=0), rtol=0, atol=1e-9)


def test_feature_map_rejects_nonfinite():
    with pytest.raises(InvalidArgument):
        FeatureMap.from_tokens([[1.0, math.nan]])


def test_embedding_one_row(tmp_path):
    row = np.arange(6, dtype=np.float32).reshape(2, 3)
    write_embeddings(tmp_path / "e.fdeb", {"item-1": row})
    ex = EmbeddingFileExtractor(tmp_path / "e.fdeb")
    np.testing.assert_array_equal(ex.extract(None, "item-1").values, row)
    with pytest.raises(NotFound):
        ex.extract(None, "item-2")
    assert (ex.tokens, ex.dim) == (2, 3)


def test_embedding_roundtrips(tmp_path):
    write_embeddings(tmp_path / "empty.fdeb", {})
    assert load_embeddings(tmp_path / "empty.fdeb") == {}
    write_embeddings(tmp_path / "z.fdeb", {"z": np.zeros((1, 4), np.float32)})
    back = load_embeddings(tmp_path / "z.fdeb")
    assert back["z"].tobytes() == np.zeros((1, 4), np.float32).tobytes()
    rng = np.random.default_rng(3)
    rows = {f"r{i}": rng.normal(size=(3, 5)).astype(np.float32) for i in range(3)}
    write_embeddings(tmp_path / "r.fdeb", rows)
    back = load_embeddings(tmp_path / "r.fdeb")
    assert list(back) == list(rows)
    for k in rows:
        assert back[k].tobytes() == rows[k].tobytes()


@settings(max_examples=30)
@given(st.dictionaries(st.text(min_size=0, max_size=12), arrays(np.float32, (2, 3), elements=st.floats(
    allow_nan=False, allow_infinity=False, width=32)), max_size=5))
def test_embedding_roundtrip_property(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("fdeb") / "p.fdeb"
    write_embeddings(path, rows)
    back = load_embeddings(path)
    assert list(back) == list(rows)
    for k in rows:
        assert back[k].tobytes() == rows[k].tobytes()


def test_embedding_header_layout(tmp_path):
    write_embeddings(tmp_path / "e.fdeb", {"ab": np.ones((2, 3), np.float32)})
    raw = (tmp_path / "e.fdeb").read_bytes()
    assert raw[:4] == b"FDEB"
    assert len(raw) == 4 + 2 + 4 + 4 + 8 + 2 + 2 + 4 * 6


def test_embedding_corruption(tmp_path):
    write_embeddings(tmp_path / "e.fdeb", {"a": np.ones((2, 2), np.float32), "b": np.ones((2, 2), np.float32)})
    raw = (tmp_path / "e.fdeb").read_bytes()
    bad = {
        "short": raw[:10],
        "magic": b"XXXX" + raw[4:],
        "truncated": raw[:-3],
        "trailing": raw + b"\0",
        "version": raw[:4] + b"\x09\x00" + raw[6:],
    }
    for name, data in bad.items():
        (tmp_path / name).write_bytes(data)
        with pytest.raises(FormatError):
            load_embeddings(tmp_path / name)


def test_embedding_inconsistent_shapes(tmp_path):
    with pytest.raises(InvalidArgument):
        write_embeddings(tmp_path / "e.fdeb", {"a": np.ones((2, 2)), "b": np.ones((3, 2))})


def test_head_forward_examples():
    assert head_forward(ClassifierHead(np.zeros(4), 0.0), np.array([3.0, -1, 2, 9])) == 0.5
    assert head_forward(ClassifierHead(np.zeros(2), math.log(3)), np.array([5.0, 6.0])) == pytest.approx(0.75, abs=1e-15)
    assert head_forward(ClassifierHead(np.array([2.0, 5.0]), -2.0), np.array([1.0, 0.0])) == 0.5
    with pytest.raises(InvalidArgument):
        head_forward(ClassifierHead(np.zeros(2)), np.zeros(3))
    with pytest.raises(InvalidArgument):
        ClassifierHead(np.array([math.inf]))


@given(arrays(np.float64, 4, elements=st.floats(-50, 50)), arrays(np.float64, 4, elements=st.floats(-50, 50)))
def test_head_forward_in_unit_interval(w, x):
    p = head_forward(ClassifierHead(w, 0.1), x)
    assert 0.0 <= p <= 1.0
