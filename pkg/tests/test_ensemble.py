import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from featdistill.data import ManifestRecord, default_profile
from featdistill.ensemble import (
    EnsembleConfig,
    Expert,
    batch_infer,
    csv_header,
    ensemble_predict,
    predict_expert,
    read_predictions,
    soft_vote,
)
from featdistill.errors import InvalidArgument
from featdistill.features import ClassifierHead, SyntheticExtractor
from featdistill.image import save_png
from featdistill.training import Checkpoint

probs = st.floats(0.0, 1.0, allow_nan=False)


def expert(name="e", bias=0.0, seed=1, side=32, weights=None):
    ex = SyntheticExtractor(seed, side, 8)
    w = np.zeros(8) if weights is None else weights
    return Expert(name, default_profile("synthetic_a", side), ex, Checkpoint(ClassifierHead(w, bias)))


def test_soft_vote_examples():
    assert soft_vote([0.5, 0.5, 0.5]) == 0.5
    assert soft_vote([0.2, 0.4, 0.6, 0.8]) == 0.5
    assert soft_vote([1, 1, 1, 0]) == 0.75
    with pytest.raises(InvalidArgument):
        soft_vote([])


@given(st.lists(probs, min_size=1, max_size=8))
def test_soft_vote_properties(ps):
    p = soft_vote(ps)
    assert min(ps) <= p <= max(ps)
    assert abs(p - math.fsum(ps) / len(ps)) <= 1e-12
    for perm in itertools.islice(itertools.permutations(ps), 6):
        assert abs(soft_vote(perm) - p) <= 1e-12


@given(probs, st.integers(1, 9))
def test_unanimous_exact(p, k):
    assert soft_vote([p] * k) == p


def test_predict_expert_examples(natural):
    assert predict_expert(expert(), natural) == 0.5
    assert predict_expert(expert(bias=math.log(3)), natural) == pytest.approx(0.75, abs=1e-15)
    e = expert(weights=np.linspace(-1, 1, 8), bias=0.1)
    assert predict_expert(e, natural) == predict_expert(e, natural)
    assert 0 < predict_expert(e, natural) < 1


def test_ensemble_predict_mean(natural):
    experts = [expert("a", weights=np.full(8, 0.3)), expert("b", bias=-1.0, seed=4, side=48)]
    cfg = EnsembleConfig(experts)
    pred = ensemble_predict(cfg, natural, "x")
    assert len(pred.per_expert) == 2
    assert pred.p_final == soft_vote(pred.per_expert)
    with pytest.raises(InvalidArgument):
        EnsembleConfig([])


def test_expert_dim_mismatch():
    with pytest.raises(InvalidArgument):
        Expert("x", default_profile("synthetic_a"), SyntheticExtractor(0, 32, 8), Checkpoint(ClassifierHead(np.zeros(3))))


def test_batch_infer_contract(tmp_path, corpus):
    recs = []
    for i in range(3):
        save_png(corpus[i], tmp_path / f"{i}.png")
        recs.append(ManifestRecord(f"{i}.png", i % 2))
    recs.append(ManifestRecord("missing.png", 1))
    cfg = EnsembleConfig([expert("a", weights=np.linspace(-1, 1, 8))])
    written, failed = batch_infer(cfg, recs, tmp_path / "p.csv", root=tmp_path)
    assert (written, failed) == (3, ["missing.png"])
    with open(tmp_path / "p.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["item_id", "p_final", "p_1"]
    assert [r[0] for r in rows[1:]] == ["0.png", "1.png", "2.png"]
    for r in rows[1:]:
        assert r[1] == r[2]
        assert len(r[1].split(".")[1]) == 6
    # worker count does not change bytes
    batch_infer(cfg, recs, tmp_path / "p4.csv", root=tmp_path, jobs=4)
    assert (tmp_path / "p.csv").read_bytes() == (tmp_path / "p4.csv").read_bytes()
    assert list(read_predictions(tmp_path / "p.csv")) == ["0.png", "1.png", "2.png"]


def test_batch_infer_empty_manifest(tmp_path):
    cfg = EnsembleConfig([expert(), expert("b", seed=2)])
    assert batch_infer(cfg, [], tmp_path / "p.csv") == (0, [])
    assert (tmp_path / "p.csv").read_text() == "item_id,p_final,p_1,p_2\n"
    assert read_predictions(tmp_path / "p.csv") == {}


def test_csv_header():
    assert csv_header(4) == ["item_id", "p_final", "p_1", "p_2", "p_3", "p_4"]


def test_read_predictions_rejects_other_files(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(InvalidArgument):
        read_predictions(tmp_path / "x.csv")
