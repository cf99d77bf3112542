import json

import pytest

from featdistill.config import load_config, parse_config
from featdistill.distortions import PipelineMode
from featdistill.errors import ConfigError
from featdistill.pipeline import shipped_config
from featdistill.training import TeacherMode


def minimal(**extra):
    d = {
        "manifest": "m.jsonl",
        "output_dir": "out",
        "experts": [{"name": "a", "kind": "synthetic_a", "extractor": {"type": "synthetic"}}],
    }
    d.update(extra)
    return d


def test_defaults():
    cfg = parse_config(minimal())
    assert cfg.seed == 0
    assert cfg.pipeline_mode is PipelineMode.MIXED_EQUAL
    tc = cfg.train_config()
    assert (tc.stage1_epochs, tc.learning_rate, tc.lambda_crd, tc.distill_weight) == (2, 0.1, 1.0, 1.0)
    assert tc.teacher_mode is TeacherMode.MOMENTUM
    assert (tc.m_base, tc.m_max, tc.temperature, tc.queue_capacity) == (0.99, 0.9999, 0.07, 4096)
    assert cfg.experts[0].profile().input_side == 32


def test_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(minimal()))
    cfg = load_config(tmp_path / "c.json")
    assert cfg.manifest_path == tmp_path / "m.jsonl"
    assert cfg.output_path == tmp_path / "out"


@pytest.mark.parametrize("patch", [
    {"unknown": 1},
    {"train": {"lambda_crd": -1}},
    {"train": {"bogus": 1}},
    {"pipeline_mode": "sometimes"},
    {"batch_size": 3},
    {"experts": []},
    {"experts": [{"name": "a", "kind": "synthetic_a", "extractor": {"type": "synthetic"}, "x": 1}]},
    {"experts": [{"name": "a", "kind": "resnet", "extractor": {"type": "synthetic"}}]},
    {"experts": [{"name": "a", "kind": "clip_l14", "input_side": 100, "extractor": {"type": "synthetic"}}]},
    {"experts": [{"name": "a", "kind": "synthetic_a", "extractor": {"type": "onnx"}}]},
    {"experts": [{"name": "a", "kind": "synthetic_a", "extractor": {"type": "synthetic"}},
                 {"name": "a", "kind": "synthetic_b", "extractor": {"type": "synthetic"}}]},
    {"train": {"m_base": 0.9999, "m_max": 0.99}},
    {"base_dir": "/"},
])
def test_rejects_invalid(patch):
    with pytest.raises(ConfigError):
        parse_config(minimal(**patch))


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{ nope")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
    (tmp_path / "list.json").write_text("[]")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.json")


@pytest.mark.parametrize("name", ["toy_blobs", "toy_images"])
def test_shipped_configs_validate(name):
    cfg = parse_config(shipped_config(name))
    assert cfg.experts
