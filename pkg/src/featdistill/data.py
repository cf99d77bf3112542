"""Manifest ingestion, balanced batching, augmentation and expert preprocessing."""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from featdistill.distortions import DistortionSpec, PipelineMode, apply, sample_spec
from featdistill.errors import InvalidArgument, ManifestParseError
from featdistill.image import SeededRng, as_image, load_png, mix64, resize_bilinear

SPLITS = ("train", "val", "hardval", "test")
_MANIFEST_FIELDS = {"path", "label", "source", "split", "distortion"}
_REQUIRED_FIELDS = _MANIFEST_FIELDS - {"distortion"}


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: int  # 0 = real, 1 = AI-generated
    source: str = "official-train"
    split: str = "train"
    distortion: DistortionSpec | None = None

    def __post_init__(self):
        if not isinstance(self.path, str) or not self.path:
            raise InvalidArgument("path must be a non-empty string")
        if isinstance(self.label, bool) or self.label not in (0, 1):
            raise InvalidArgument(f"label must be 0 or 1, got {self.label!r}")
        if self.split not in SPLITS:
            raise InvalidArgument(f"unknown split {self.split!r}; expected one of {SPLITS}")

    @property
    def item_id(self) -> str:
        return self.path

    def to_dict(self) -> dict:
        d = {"path": self.path, "label": self.label, "source": self.source, "split": self.split}
        if self.distortion is not None:
            d["distortion"] = self.distortion.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ManifestRecord:
        if not isinstance(d, dict):
            raise InvalidArgument("record must be a JSON object")
        unknown = set(d) - _MANIFEST_FIELDS
        if unknown:
            raise InvalidArgument(f"unknown fields {sorted(unknown)}")
        missing = _REQUIRED_FIELDS - set(d)
        if missing:
            raise InvalidArgument(f"missing fields {sorted(missing)}")
        dist = d.get("distortion")
        if isinstance(dist, str):
            dist = DistortionSpec.from_json(dist)
        elif dist is not None:
            dist = DistortionSpec.from_dict(dist)
        return cls(d["path"], d["label"], d["source"], d["split"], dist)


def load_manifest(path) -> list[ManifestRecord]:
    """Read a JSONL manifest, one record per line, rejecting unknown fields.

    Raises:
        ManifestParseError: naming the 1-based line number of the bad record.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(ManifestRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ManifestParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
            except InvalidArgument as exc:
                raise ManifestParseError(path, lineno, str(exc)) from None
    return records


def write_manifest(records: Sequence[ManifestRecord], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), separators=(",", ":")) + "\n")


# ---------------------------------------------------------------- experts


class ExpertKind(str, enum.Enum):
    CLIP_L14 = "clip_l14"
    SIGLIP_400M = "siglip_400m"
    SYNTHETIC_A = "synthetic_a"
    SYNTHETIC_B = "synthetic_b"


# Upstream preprocessing constants of each model family.
CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)
SIGLIP_MEAN = (0.5, 0.5, 0.5)
SIGLIP_STD = (0.5, 0.5, 0.5)


@dataclass(frozen=True)
class ExpertProfile:
    kind: ExpertKind
    input_side: int
    mean: tuple[float, float, float]
    std: tuple[float, float, float]

    def __post_init__(self):
        if self.input_side <= 0:
            raise InvalidArgument(f"input_side must be positive, got {self.input_side}")
        if len(self.mean) != 3 or len(self.std) != 3 or min(self.std) <= 0:
            raise InvalidArgument("mean/std must be triples with positive std")


def default_profile(kind, input_side: int | None = None, mean=None, std=None) -> ExpertProfile:
    """Preprocessing profile for ``kind``; real backbones have fixed sides."""
    kind = ExpertKind(kind)
    defaults = {
        ExpertKind.CLIP_L14: (224, CLIP_MEAN, CLIP_STD),
        ExpertKind.SIGLIP_400M: (384, SIGLIP_MEAN, SIGLIP_STD),
        ExpertKind.SYNTHETIC_A: (32, SIGLIP_MEAN, SIGLIP_STD),
        ExpertKind.SYNTHETIC_B: (48, SIGLIP_MEAN, SIGLIP_STD),
    }
    side, m, s = defaults[kind]
    if input_side is not None:
        if kind in (ExpertKind.CLIP_L14, ExpertKind.SIGLIP_400M) and input_side != side:
            raise InvalidArgument(f"{kind.value} requires input_side {side}")
        side = int(input_side)
    return ExpertProfile(kind, side, tuple(mean or m), tuple(std or s))


def preprocess(img, profile: ExpertProfile) -> np.ndarray:
    """Resize the shorter side, centre-crop to a square and normalize per channel."""
    img = as_image(img)
    if img.shape[2] != 3:
        raise InvalidArgument("preprocess needs a 3-channel image; replicate grayscale first")
    side = profile.input_side
    h, w, _ = img.shape
    if h <= w:
        nh, nw = side, max(side, round(w * side / h))
    else:
        nh, nw = max(side, round(h * side / w)), side
    img = resize_bilinear(img, nh, nw)
    top, left = (nh - side) // 2, (nw - side) // 2
    crop = img[top : top + side, left : left + side]
    mean = np.asarray(profile.mean)[None, None, :]
    std = np.asarray(profile.std)[None, None, :]
    return (crop - mean) / std


# ---------------------------------------------------------------- batching


@dataclass
class Batch:
    item_ids: list[int]
    labels: np.ndarray
    tensors: np.ndarray | None = None
    applied_specs: list[DistortionSpec | None] = field(default_factory=list)

    def __len__(self):
        return len(self.item_ids)


def _class_stream(indices, needed, rng):
    # Successive reshuffled passes; the minority class repeats (oversampling).
    out = []
    while len(out) < needed:
        out.extend(indices[i] for i in rng.permutation(len(indices)))
    return out[:needed]


def balanced_batches(records: Sequence[ManifestRecord], batch_size: int, seed: int,
                     epoch: int = 0, source_repeats: dict[str, int] | None = None) -> list[Batch]:
    """One epoch of label-balanced batches over ``records``.

    Each batch holds ``batch_size / 2`` items of each class.  The epoch covers
    the larger class once; the smaller class is oversampled by reshuffled
    repetition.  ``source_repeats`` scales how often each source appears in
    the pool (0 drops it); sources not listed count once.
    """
    if batch_size < 2 or batch_size % 2:
        raise InvalidArgument(f"batch_size must be a positive even number, got {batch_size}")
    pool = {0: [], 1: []}
    for i, rec in enumerate(records):
        reps = 1 if source_repeats is None else int(source_repeats.get(rec.source, 1))
        pool[rec.label].extend([i] * reps)
    if not pool[0] or not pool[1]:
        raise InvalidArgument("both classes must be present to build balanced batches")
    half = batch_size // 2
    n_batches = math.ceil(max(len(pool[0]), len(pool[1])) / half)
    rng = SeededRng(mix64(seed, epoch))
    reals = _class_stream(pool[0], n_batches * half, rng)
    fakes = _class_stream(pool[1], n_batches * half, rng)
    batches = []
    for b in range(n_batches):
        ids = reals[b * half : (b + 1) * half] + fakes[b * half : (b + 1) * half]
        order = rng.permutation(batch_size)
        ids = [ids[j] for j in order]
        labels = np.array([records[i].label for i in ids], dtype=np.float64)
        batches.append(Batch(ids, labels))
    return batches


def augment(img, mode, rng: SeededRng):
    """Degrade ``img`` with one spec drawn for ``mode``; clean mode returns it as is."""
    spec = sample_spec(rng, mode)
    if spec is None:
        return as_image(img), None
    return apply(spec, img), spec


def item_seed(seed: int, epoch: int, position: int) -> int:
    return mix64(mix64(seed, epoch), position)


def materialize(batch: Batch, records: Sequence[ManifestRecord], profile: ExpertProfile,
                mode, seed: int, epoch: int = 0, batch_index: int = 0,
                loader: Callable = load_png, root=None, jobs: int = 1) -> Batch:
    """Load, augment and preprocess the images of ``batch``.

    Every item gets its own seed from (seed, epoch, position in the epoch), so
    the result does not depend on ``jobs``.
    """
    mode = PipelineMode.parse(mode)
    base = Path(root) if root is not None else None
    n = len(batch)

    def work(slot):
        rec = records[batch.item_ids[slot]]
        path = base / rec.path if base is not None else rec.path
        img = loader(path)
        if img.shape[2] == 1:
            img = np.repeat(img, 3, axis=2)
        rng = SeededRng(item_seed(seed, epoch, batch_index * n + slot))
        out, spec = augment(img, mode, rng)
        return preprocess(out, profile), spec

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, range(n)))
    else:
        results = [work(s) for s in range(n)]
    tensors = np.stack([r[0] for r in results])
    return Batch(list(batch.item_ids), batch.labels.copy(), tensors, [r[1] for r in results])
