"""Per-expert prediction and K-way soft voting."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from featdistill.data import ExpertProfile, ManifestRecord, preprocess
from featdistill.errors import FeatDistillError, InvalidArgument
from featdistill.features import head_forward
from featdistill.image import load_png, to_rgb
from featdistill.training.checkpoint import Checkpoint

log = logging.getLogger(__name__)


@dataclass
class Expert:
    name: str
    profile: ExpertProfile
    extractor: object
    checkpoint: Checkpoint

    def __post_init__(self):
        dim = getattr(self.extractor, "dim", None)
        if dim and dim != self.checkpoint.dim:
            raise InvalidArgument(
                f"expert {self.name}: extractor dim {dim} != checkpoint dim {self.checkpoint.dim}")

    @property
    def needs_pixels(self) -> bool:
        return bool(getattr(self.extractor, "needs_pixels", True))


@dataclass
class EnsembleConfig:
    experts: list[Expert]

    def __post_init__(self):
        if not self.experts:
            raise InvalidArgument("an ensemble needs at least one expert")

    @property
    def k(self) -> int:
        return len(self.experts)

    @property
    def needs_pixels(self) -> bool:
        return any(e.needs_pixels for e in self.experts)


@dataclass
class Prediction:
    item_id: str
    per_expert: list[float]
    p_final: float
    latency_ms: float | None = None


def soft_vote(probs: Sequence[float]) -> float:
    """Arithmetic mean of expert probabilities (exactly rounded sum)."""
    probs = [float(p) for p in probs]
    if not probs:
        raise InvalidArgument("soft_vote needs at least one probability")
    lo, hi = min(probs), max(probs)
    if lo == hi:
        return lo
    return min(max(math.fsum(probs) / len(probs), lo), hi)


def predict_expert(expert: Expert, img, item_id=None) -> float:
    tensor = None
    if expert.needs_pixels:
        tensor = preprocess(to_rgb(img), expert.profile)
    fmap = expert.extractor.extract(tensor, item_id)
    pooled = expert.checkpoint.projection() @ fmap.pooled
    return head_forward(expert.checkpoint.head, pooled)


def ensemble_predict(cfg: EnsembleConfig, img, item_id=None) -> Prediction:
    per_expert = [predict_expert(e, img, item_id) for e in cfg.experts]
    return Prediction(str(item_id), per_expert, soft_vote(per_expert))


def csv_header(k: int) -> list[str]:
    return ["item_id", "p_final"] + [f"p_{i}" for i in range(1, k + 1)]


def batch_infer(cfg: EnsembleConfig, records: Sequence[ManifestRecord], out_path,
                jobs: int = 1, root=None, loader: Callable = load_png) -> tuple[int, list[str]]:
    """Score every record and write the predictions CSV in manifest order.

    Items whose image (or embedding) cannot be read are logged and skipped.
    Returns ``(rows_written, failed_item_ids)``.
    """
    base = Path(root) if root is not None else None

    def work(rec: ManifestRecord):
        img = None
        try:
            if cfg.needs_pixels:
                img = loader(base / rec.path if base is not None else rec.path)
            return ensemble_predict(cfg, img, rec.item_id)
        except (OSError, FeatDistillError, ValueError) as exc:
            log.warning("skipping %s: %s", rec.item_id, exc)
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, records))
    else:
        results = [work(r) for r in records]

    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    failed = []
    written = 0
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(cfg.k))
        for rec, pred in zip(records, results):
            if pred is None:
                failed.append(rec.item_id)
                continue
            writer.writerow([pred.item_id, f"{pred.p_final:.6f}"] + [f"{p:.6f}" for p in pred.per_expert])
            written += 1
    return written, failed


def read_predictions(path) -> dict[str, float]:
    """``item_id -> p_final`` from a predictions CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["item_id", "p_final"]:
            raise InvalidArgument(f"{path}: not a predictions file (header {header})")
        out = {}
        for row in reader:
            if row:
                out[row[0]] = float(row[1])
    return out

