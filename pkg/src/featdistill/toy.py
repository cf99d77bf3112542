"""Desk-scale toy tasks in feature space.

``blob_dataset`` builds two separable Gaussian blobs of token maps.

``robustness_trial`` mimics how degradations interact with a detector: each
item has a weak but robust *semantic* cue and a strong but fragile *artifact*
cue (the high-frequency generator fingerprint).  A sampled
:class:`~featdistill.distortions.DistortionSpec` attenuates and masks the
artifact cue in proportion to its severity and shifts the fragile dims by a
category-specific offset.  A detector trained on clean features leans on
the artifact cue and loses it under distortion; one trained with degradation
augmentation learns to rely on the semantic cue.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from featdistill.data import ManifestRecord, balanced_batches, item_seed
from featdistill.distortions import DistortionSpec, PipelineMode, sample_spec
from featdistill.image import SeededRng, mix64
from featdistill.metrics import auc_from_scores
from featdistill.training import FeatureBatch, TrainConfig, predict_tokens, train_stage1, train_stage2


def blob_dataset(items: int = 512, dim: int = 8, tokens: int = 4, separation: float = 3.0,
                 seed: int = 0, prefix: str = "blob"):
    """Two Gaussian blobs of (tokens, dim) maps; returns ``(rows, records)``.

    Class means sit at ``+-separation/2`` along a seeded unit direction and
    every token carries unit isotropic noise.
    """
    rng = SeededRng(seed)
    direction = rng.normal(0.0, 1.0, dim)
    direction /= np.linalg.norm(direction)
    rows, records = {}, []
    for i in range(items):
        label = i % 2
        centre = (separation / 2.0) * (1.0 if label else -1.0) * direction
        key = f"{prefix}/{i:05d}"
        rows[key] = (centre + rng.normal(0.0, 1.0, (tokens, dim))).astype(np.float32)
        records.append(ManifestRecord(key, label, "toy-blobs", "train"))
    return rows, records


def feature_batches(rows, records, batch_size: int, seed: int):
    """Callable ``epoch -> [FeatureBatch]`` over fixed (embedding-file) features."""
    keys = [r.item_id for r in records]

    def make(epoch):
        out = []
        for b in balanced_batches(records, batch_size, seed, epoch):
            tokens = np.stack([rows[keys[i]] for i in b.item_ids]).astype(np.float64)
            out.append(FeatureBatch(tokens, b.labels, [keys[i] for i in b.item_ids]))
        return out

    return make


# ---------------------------------------------------------------- robustness toy

SEMANTIC = slice(0, 2)
ARTIFACT = slice(2, 4)

# How strongly each category destroys high-frequency generator traces.
FRAGILITY = {
    "blur": 1.0, "compression": 1.0, "noise": 0.8, "environmental": 0.6, "sensor": 0.5,
    "geometric": 0.5, "occlusion": 0.4, "filter": 0.3, "color": 0.2,
}


@dataclass(frozen=True)
class FeatureToy:
    dim: int = 8
    tokens: int = 4
    semantic_shift: float = 0.35
    artifact_shift: float = 1.2
    artifact_noise: float = 0.3
    offset_scale: float = 0.5
    seed: int = 0

    def clean(self, label: int, rng: SeededRng) -> np.ndarray:
        sign = 1.0 if label else -1.0
        x = rng.normal(0.0, 1.0, (self.tokens, self.dim))
        x[:, SEMANTIC] += sign * self.semantic_shift
        x[:, ARTIFACT] = sign * self.artifact_shift + self.artifact_noise * x[:, ARTIFACT]
        return x

    def category_offset(self, category: str) -> np.ndarray:
        """Unit shift each category applies to the fragile (high-frequency) dims."""
        rng = SeededRng(mix64(self.seed, zlib.crc32(category.encode())))
        u = np.zeros(self.dim)
        u[ARTIFACT] = rng.normal(0.0, 1.0, ARTIFACT.stop - ARTIFACT.start)
        return u / np.linalg.norm(u)

    def corrupt(self, x: np.ndarray, spec: DistortionSpec | None) -> np.ndarray:
        """Feature-space effect of ``spec``: fragile cue fades, category offset appears."""
        if spec is None:
            return x.copy()
        rng = SeededRng(spec.seed)
        k = spec.severity
        frag = FRAGILITY.get(spec.operator.category, 0.5)
        out = x.copy()
        out[:, ARTIFACT] *= max(0.0, 1.0 - 0.2 * k * frag)
        out[:, ARTIFACT] += rng.normal(0.0, 0.4 * k * frag, out[:, ARTIFACT].shape)
        out[:, SEMANTIC] += rng.normal(0.0, 0.1 * k, out[:, SEMANTIC].shape)
        out += self.offset_scale * k * self.category_offset(spec.operator.category)
        return out


def robustness_trial(seed: int, train_mode, config: TrainConfig | None = None,
                     n_train: int = 512, n_test: int = 1024, batch_size: int = 32,
                     test_mode=PipelineMode.MIXED_EQUAL, toy: FeatureToy | None = None) -> float:
    """Train on ``train_mode`` degradations, return AUC on a degraded held-out set.

    Clean features, batch order and model initialization depend only on
    ``seed``, so two calls that differ in ``train_mode`` are identically seeded.
    """
    toy = toy or FeatureToy(seed=seed)
    config = config or TrainConfig(seed=seed)
    train_mode = PipelineMode.parse(train_mode)
    data_rng = SeededRng(mix64(seed, 101))
    train_labels = [i % 2 for i in range(n_train)]
    train_clean = [toy.clean(y, data_rng) for y in train_labels]
    records = [ManifestRecord(f"toy/{i:05d}", y, "toy-features", "train") for i, y in enumerate(train_labels)]

    def view(i, epoch, slot):
        spec = sample_spec(SeededRng(mix64(item_seed(seed, epoch, i), slot)), train_mode)
        return toy.corrupt(train_clean[i], spec)

    def batches(epoch):
        out = []
        for b in balanced_batches(records, batch_size, seed, epoch):
            a = np.stack([view(i, epoch, 0) for i in b.item_ids])
            alt = np.stack([view(i, epoch, 1) for i in b.item_ids])
            out.append(FeatureBatch(a, b.labels, list(b.item_ids), alt))
        return out

    cache = {}

    def cached(epoch):
        if epoch not in cache:
            cache[epoch] = batches(epoch)
        return cache[epoch]

    stage1 = train_stage1(config, cached)
    final = train_stage2(config, cached, stage1) if config.stage2_epochs else stage1

    test_rng = SeededRng(mix64(seed, 202))
    test_labels = np.array([i % 2 for i in range(n_test)])
    test_x = []
    for i, y in enumerate(test_labels):
        spec = sample_spec(SeededRng(mix64(mix64(seed, 303), i)), test_mode)
        test_x.append(toy.corrupt(toy.clean(int(y), test_rng), spec))
    scores = predict_tokens(final, np.stack(test_x))
    return auc_from_scores(scores, test_labels)
