"""End-to-end runs behind the CLI: distort a folder, train experts, infer, evaluate."""

from __future__ import annotations

import json
import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from pathlib import Path

import numpy as np

from featdistill import __version__
from featdistill.config import EmbeddingSection, ExpertSection, RunConfig
from featdistill.corpus import toy_image
from featdistill.data import ManifestRecord, balanced_batches, load_manifest, materialize, preprocess, write_manifest
from featdistill.distortions import PipelineMode, apply, sample_spec
from featdistill.ensemble import EnsembleConfig, Expert, batch_infer, read_predictions
from featdistill.errors import InvalidArgument, NotFound
from featdistill.features import EmbeddingFileExtractor, SyntheticExtractor, write_embeddings
from featdistill.image import SeededRng, load_png, mix64, save_png, to_rgb
from featdistill.metrics import ScoredItem, auc_from_scores, robust_report
from featdistill.plots import plot_training_log, write_report_figures
from featdistill.toy import blob_dataset
from featdistill.training import (
    FeatureBatch,
    predict_tokens,
    read_checkpoint,
    train_stage1,
    train_stage2,
    write_checkpoint,
)

log = logging.getLogger(__name__)


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_jsonl(rows, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


# ---------------------------------------------------------------- distort


def _png_inputs(in_dir: Path) -> list[Path]:
    return sorted(p for p in in_dir.rglob("*") if p.is_file() and p.suffix.lower() == ".png")


def distort_folder(in_dir, out_dir, mode, seed: int, count: int = 1, jobs: int = 1,
                   manifest=None) -> tuple[int, int]:
    """Write ``count`` degraded copies of every PNG under ``in_dir``.

    Outputs are ``<stem>_<c>.png`` at the same relative location, plus
    ``specs.jsonl``.  With ``manifest`` (records relative to the manifest's
    directory) an output manifest carrying the applied specs is also written.
    Returns ``(inputs_ok, inputs_failed)``.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    if not in_dir.is_dir():
        raise NotFound(f"input directory not found: {in_dir}")
    if count < 1:
        raise InvalidArgument("count must be >= 1")
    mode = PipelineMode.parse(mode)
    inputs = _png_inputs(in_dir)

    by_path = {}
    if manifest is not None:
        manifest = Path(manifest)
        for rec in load_manifest(manifest):
            by_path[(manifest.parent / rec.path).resolve()] = rec

    def work(src: Path):
        rel = src.relative_to(in_dir)
        try:
            img = load_png(src)
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable %s: %s", src, exc)
            return None
        base = mix64(seed, zlib.crc32(rel.as_posix().encode()))
        outs = []
        for c in range(count):
            spec = sample_spec(SeededRng(mix64(base, c)), mode)
            out = img if spec is None else apply(spec, img)
            dst_rel = rel.with_name(f"{rel.stem}_{c}.png")
            save_png(out, out_dir / dst_rel)
            outs.append((dst_rel.as_posix(), spec))
        return outs

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, inputs))
    else:
        results = [work(p) for p in inputs]

    spec_rows, out_records = [], []
    ok = failed = 0
    for src, outs in zip(inputs, results):
        if outs is None:
            failed += 1
            continue
        ok += 1
        rel = src.relative_to(in_dir).as_posix()
        rec = by_path.get(src.resolve())
        if manifest is not None and rec is None:
            log.warning("%s is not listed in %s; left out of the output manifest", src, manifest)
        for dst, spec in outs:
            spec_rows.append({"input": rel, "output": dst, "spec": None if spec is None else spec.to_dict(),
                              "featdistill_version": __version__})
            if rec is not None:
                out_records.append(ManifestRecord(dst, rec.label, rec.source, rec.split, spec))
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl(spec_rows, out_dir / "specs.jsonl")
    if manifest is not None:
        write_manifest(out_records, out_dir / "manifest.jsonl")
    return ok, failed


# ---------------------------------------------------------------- prepare

CONFIG_DIR = Path(__file__).parent / "configs"


def shipped_config(name: str) -> dict:
    path = CONFIG_DIR / f"{name}.json"
    if not path.exists():
        raise NotFound(f"no shipped config named {name!r}")
    return json.loads(path.read_text(encoding="utf-8"))


def prepare_blobs(out_dir, seed: int = 0, items: int = 512) -> Path:
    """Separable feature blobs as an embedding file, a manifest and a config."""
    out_dir = Path(out_dir)
    rows, records = blob_dataset(items=items, seed=seed)
    write_embeddings(out_dir / "blobs.fdeb", rows)
    write_manifest(records, out_dir / "manifest.jsonl")
    cfg = shipped_config("toy_blobs")
    cfg["seed"] = seed
    _dump_json(cfg, out_dir / "config.json")
    return out_dir / "config.json"


def prepare_images(out_dir, seed: int = 0, train: int = 64, test: int = 32, size: int = 48) -> Path:
    """Small real/fake PNG set (fakes carry a faint periodic trace) with a config."""
    out_dir = Path(out_dir)
    records = []
    for i in range(train + test):
        label = i % 2
        split = "train" if i < train else "test"
        rel = f"images/{split}_{i:04d}.png"
        save_png(toy_image(size, label, mix64(seed, i)), out_dir / rel)
        records.append(ManifestRecord(rel, label, "toy-images", split))
    write_manifest(records, out_dir / "manifest.jsonl")
    cfg = shipped_config("toy_images")
    cfg["seed"] = seed
    _dump_json(cfg, out_dir / "config.json")
    return out_dir / "config.json"


# ---------------------------------------------------------------- experts


def build_extractor(section: ExpertSection, cfg: RunConfig):
    ex = section.extractor
    if isinstance(ex, EmbeddingSection):
        path = cfg.resolve(ex.path)
        if not path.exists():
            raise NotFound(f"embedding file not found: {path}")
        return EmbeddingFileExtractor(path)
    return SyntheticExtractor(ex.seed, section.profile().input_side, ex.dim)


def checkpoint_path(cfg: RunConfig, name: str, stage: int) -> Path:
    return cfg.output_path / "checkpoints" / f"{name}_stage{stage}.fdck"


def _cached_loader():
    @lru_cache(maxsize=None)
    def load(path):
        return to_rgb(load_png(path))

    return load


class _ExpertData:
    """Per-epoch feature batches for one expert, cached because stage 2 revisits epochs."""

    def __init__(self, cfg: RunConfig, section: ExpertSection, extractor, records, root: Path, jobs: int):
        self.cfg, self.section, self.extractor = cfg, section, extractor
        self.records, self.root, self.jobs = records, root, jobs
        self.profile = section.profile()
        self.loader = _cached_loader()
        self._cache: dict[int, list[FeatureBatch]] = {}

    def _tokens(self, tensors, ids):
        return np.stack([self.extractor.extract(t, i).values for t, i in zip(tensors, ids)])

    def __call__(self, epoch: int) -> list[FeatureBatch]:
        if epoch in self._cache:
            return self._cache[epoch]
        cfg = self.cfg
        out = []
        for bi, b in enumerate(balanced_batches(self.records, cfg.batch_size, cfg.seed, epoch)):
            ids = [self.records[i].item_id for i in b.item_ids]
            if not self.extractor.needs_pixels:
                out.append(FeatureBatch(self._tokens([None] * len(ids), ids), b.labels, ids))
                continue
            views = []
            for view_seed in (cfg.seed, mix64(cfg.seed, 1)):
                m = materialize(b, self.records, self.profile, cfg.pipeline_mode, view_seed, epoch, bi,
                                loader=self.loader, root=self.root, jobs=self.jobs)
                views.append(self._tokens(m.tensors, ids))
            out.append(FeatureBatch(views[0], b.labels, ids, views[1]))
        self._cache[epoch] = out
        return out

    def clean_tokens(self) -> np.ndarray:
        ids = [r.item_id for r in self.records]
        if not self.extractor.needs_pixels:
            return self._tokens([None] * len(ids), ids)
        tensors = [preprocess(self.loader(self.root / r.path), self.profile) for r in self.records]
        return self._tokens(tensors, ids)


# ---------------------------------------------------------------- train


def train_run(cfg: RunConfig, jobs: int = 1) -> dict:
    """Train every configured expert on the manifest's train split."""
    manifest = cfg.manifest_path
    if not manifest.exists():
        raise NotFound(f"manifest not found: {manifest}")
    records = [r for r in load_manifest(manifest) if r.split == "train"]
    if not records:
        raise InvalidArgument(f"{manifest}: no records in the train split")
    out = cfg.output_path
    tcfg = cfg.train_config()
    summary = {"featdistill_version": __version__, "config_hash": tcfg.digest(), "seed": cfg.seed,
               "train_items": len(records), "experts": {}}
    log_rows = []
    for section in cfg.experts:
        extractor = build_extractor(section, cfg)
        data = _ExpertData(cfg, section, extractor, records, manifest.parent, jobs)
        entries: list[dict] = []
        stage1 = train_stage1(tcfg, data, log=entries)
        write_checkpoint(stage1, checkpoint_path(cfg, section.name, 1))
        final = stage1
        if tcfg.stage2_epochs:
            final = train_stage2(tcfg, data, stage1, log=entries)
            write_checkpoint(final, checkpoint_path(cfg, section.name, 2))
        for e in entries:
            log_rows.append({"expert": section.name, **e})
        clean = data.clean_tokens()
        labels = np.array([r.label for r in records])
        summary["experts"][section.name] = {
            "stage1_train_auc": auc_from_scores(predict_tokens(stage1, clean), labels),
            "final_train_auc": auc_from_scores(predict_tokens(final, clean), labels),
            "steps": final.step,
        }
        plot_training_log(entries, out / f"train_loss_{section.name}.png", title=f"{section.name} loss")
        log.info("trained %s: %s", section.name, summary["experts"][section.name])
    _write_jsonl(log_rows, out / "train_log.jsonl")
    _dump_json(summary, out / "train_summary.json")
    return summary


# ---------------------------------------------------------------- infer / eval


def load_ensemble(cfg: RunConfig) -> EnsembleConfig:
    experts = []
    for section in cfg.experts:
        path = checkpoint_path(cfg, section.name, 2)
        if cfg.train.stage2_epochs == 0:
            path = checkpoint_path(cfg, section.name, 1)
        if not path.exists():
            raise NotFound(f"checkpoint not found: {path}")
        experts.append(Expert(section.name, section.profile(), build_extractor(section, cfg), read_checkpoint(path)))
    return EnsembleConfig(experts)


def infer_run(cfg: RunConfig, manifest=None, out_csv=None, jobs: int = 1) -> tuple[int, list[str]]:
    manifest = Path(manifest) if manifest is not None else cfg.manifest_path
    if not manifest.exists():
        raise NotFound(f"manifest not found: {manifest}")
    out_csv = Path(out_csv) if out_csv is not None else cfg.output_path / "predictions.csv"
    ensemble = load_ensemble(cfg)
    records = load_manifest(manifest)
    return batch_infer(ensemble, records, out_csv, jobs=jobs, root=manifest.parent)


def eval_run(pred_csv, manifest, out_dir) -> dict:
    """Join predictions with the manifest and write report.json, report.txt and figures."""
    pred_csv, manifest, out_dir = Path(pred_csv), Path(manifest), Path(out_dir)
    for p in (pred_csv, manifest):
        if not p.exists():
            raise NotFound(f"file not found: {p}")
    preds = read_predictions(pred_csv)
    if not preds:
        raise InvalidArgument(f"{pred_csv}: no predictions (header only)")
    records = {r.item_id: r for r in load_manifest(manifest)}
    unknown = [k for k in preds if k not in records]
    if unknown:
        raise InvalidArgument(f"{pred_csv}: {len(unknown)} item(s) not in {manifest}, e.g. {unknown[0]!r}")
    missing = len(records) - len(preds)
    if missing:
        log.warning("%d manifest item(s) have no prediction and are left out", missing)
    items = []
    for item_id, score in preds.items():
        rec = records[item_id]
        d = rec.distortion
        items.append(ScoredItem(score, rec.label, d.op if d else None, d.severity if d else None))
    if len({it.label for it in items}) < 2:
        raise InvalidArgument("evaluation needs both labels among the predicted items")
    report = robust_report(items)
    payload = {"featdistill_version": __version__, **report.to_dict()}
    _dump_json(payload, out_dir / "report.json")
    (out_dir / "report.txt").write_text(report.to_table(), encoding="utf-8")
    write_report_figures(report, [it.score for it in items], [it.label for it in items], out_dir)
    return payload
