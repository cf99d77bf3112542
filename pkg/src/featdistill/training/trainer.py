"""Two-stage training over fixed feature extractors.

Stage 1 fits the logistic head with plain SGD on binary cross-entropy.
Stage 2 inserts a trainable D x D projector between the extractor tokens and
the head.  The projector is pulled toward a teacher copy by the dense
alignment loss and, optionally, made view-invariant by an InfoNCE loss
against a FIFO negative queue.  The teacher is either the frozen stage-1
projector or an EMA of the student under the cosine momentum schedule.

The BCE gradient only reaches the head; the projector learns from the
representation terms alone.  With both representation weights at zero,
stage 2 therefore reproduces a continued stage-1 run exactly.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import expit

from featdistill.errors import InvalidArgument
from featdistill.features import ClassifierHead
from featdistill.image import SeededRng, mix64
from featdistill.training.checkpoint import Checkpoint
from featdistill.training.losses import (
    NegativeQueue,
    ema_update,
    head_bce,
    l2_normalize,
    momentum,
    projector_crd,
    projector_distill,
    total_loss,
)


class TeacherMode(str, enum.Enum):
    FROZEN_CHECKPOINT = "frozen_checkpoint"
    MOMENTUM = "momentum"


@dataclass
class TrainConfig:
    stage1_epochs: int = 2
    stage2_epochs: int = 2
    learning_rate: float = 0.1
    lambda_crd: float = 1.0
    distill_weight: float = 1.0
    teacher_mode: TeacherMode = TeacherMode.MOMENTUM
    m_base: float = 0.99
    m_max: float = 0.9999
    temperature: float = 0.07
    queue_capacity: int = 4096
    normalize_distill: bool = True
    seed: int = 0

    def __post_init__(self):
        self.teacher_mode = TeacherMode(self.teacher_mode)
        if self.stage1_epochs < 0 or self.stage2_epochs < 0:
            raise InvalidArgument("epoch counts must be >= 0")
        if self.learning_rate < 0:
            raise InvalidArgument("learning_rate must be >= 0")
        if self.lambda_crd < 0 or self.distill_weight < 0:
            raise InvalidArgument("loss weights must be >= 0")
        if not 0.0 <= self.m_base <= self.m_max <= 1.0:
            raise InvalidArgument("need 0 <= m_base <= m_max <= 1")
        if self.temperature <= 0:
            raise InvalidArgument("temperature must be > 0")
        if self.queue_capacity < 0:
            raise InvalidArgument("queue_capacity must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["teacher_mode"] = self.teacher_mode.value
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class FeatureBatch:
    """Extractor outputs for one batch; ``tokens_alt`` is an optional second view."""

    tokens: np.ndarray  # (N, T, D)
    labels: np.ndarray  # (N,)
    item_ids: list = field(default_factory=list)
    tokens_alt: np.ndarray | None = None

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.tokens.ndim != 3 or self.tokens.shape[0] != self.labels.shape[0]:
            raise InvalidArgument(f"tokens {self.tokens.shape} / labels {self.labels.shape} mismatch")
        if self.tokens_alt is not None:
            self.tokens_alt = np.asarray(self.tokens_alt, dtype=np.float64)
            if self.tokens_alt.shape != self.tokens.shape:
                raise InvalidArgument("second view must match the first view's shape")

    @property
    def pooled(self) -> np.ndarray:
        return self.tokens.mean(axis=1)


Batches = Union[Sequence[FeatureBatch], Callable[[int], Sequence[FeatureBatch]]]


def _epoch(batches: Batches, epoch: int) -> Sequence[FeatureBatch]:
    out = batches(epoch) if callable(batches) else batches
    if len(out) == 0:
        raise InvalidArgument("training needs at least one batch")
    return out


def init_head(dim: int, seed: int) -> ClassifierHead:
    rng = SeededRng(mix64(seed, 1))
    return ClassifierHead(rng.normal(0.0, 0.01, dim), 0.0)


def _log(log, **entry):
    if log is not None:
        log.append(entry)


def train_stage1(config: TrainConfig, batches: Batches, log: list | None = None,
                 head: ClassifierHead | None = None, epoch_offset: int = 0) -> Checkpoint:
    """SGD on the head with the closed-form BCE gradient.

    ``batches`` is a list reused every epoch or a callable ``epoch -> list``.
    Per-step records are appended to ``log`` when given.
    """
    first = _epoch(batches, epoch_offset)
    dim = first[0].tokens.shape[2]
    if head is None:
        head = init_head(dim, config.seed)
    w, b = head.weights.copy(), head.bias
    lr = config.learning_rate
    step = 0
    for e in range(config.stage1_epochs):
        for fb in _epoch(batches, epoch_offset + e):
            loss, dw, db, _ = head_bce(w, b, fb.pooled, fb.labels)
            w = w - lr * dw
            b = b - lr * db
            _log(log, stage=1, step=step, loss_bce=loss, loss_crd=0.0, loss_distill=0.0,
                 loss_total=loss, momentum=None)
            step += 1
    return Checkpoint(ClassifierHead(w, b), None, step, config.digest())


def train_stage2(config: TrainConfig, batches: Batches, stage1: Checkpoint,
                 log: list | None = None, momentum_trace: list | None = None) -> Checkpoint:
    """Distillation stage starting from ``stage1``; see the module docstring."""
    offset = config.stage1_epochs
    first = _epoch(batches, offset)
    dim = first[0].tokens.shape[2]
    if dim != stage1.dim:
        raise InvalidArgument(f"feature dim {dim} does not match checkpoint dim {stage1.dim}")
    steps_per_epoch = len(first)
    total_steps = config.stage2_epochs * steps_per_epoch
    schedule_end = max(total_steps - 1, 1)

    w, b = stage1.head.weights.copy(), stage1.head.bias
    P = stage1.projection().copy()
    teacher = P.copy()
    queue = NegativeQueue(config.queue_capacity, dim)
    lr, lam, wd = config.learning_rate, config.lambda_crd, config.distill_weight
    step = 0
    for e in range(config.stage2_epochs):
        epoch_batches = _epoch(batches, offset + e)
        if len(epoch_batches) != steps_per_epoch:
            raise InvalidArgument("every stage-2 epoch must have the same number of batches")
        for fb in epoch_batches:
            xbar = fb.pooled
            pooled = xbar @ P.T
            bce, dw, db, _ = head_bce(w, b, pooled, fb.labels)
            distill, d_distill = projector_distill(P, teacher, fb.tokens, config.normalize_distill)
            crd, d_crd, keys = 0.0, None, None
            if lam > 0:
                alt = fb.tokens_alt.mean(axis=1) if fb.tokens_alt is not None else xbar
                keys = l2_normalize(alt @ teacher.T)
                crd, d_crd = projector_crd(P, xbar, keys, queue.as_array(), config.temperature)
            loss = total_loss(bce, crd, distill, lam, wd)

            w = w - lr * dw
            b = b - lr * db
            if wd > 0:
                P = P - lr * wd * d_distill
            if d_crd is not None:
                P = P - lr * lam * d_crd
                queue.push(keys)

            m = None
            if config.teacher_mode is TeacherMode.MOMENTUM:
                m = momentum(step, schedule_end, config.m_base, config.m_max)
                teacher = ema_update(teacher, P, m)
                if momentum_trace is not None:
                    momentum_trace.append(m)
            _log(log, stage=2, step=step, loss_bce=bce, loss_crd=crd, loss_distill=distill,
                 loss_total=loss, momentum=m)
            step += 1
    return Checkpoint(ClassifierHead(w, b), P, stage1.step + step, config.digest())


def predict_tokens(ckpt: Checkpoint, tokens) -> np.ndarray:
    """Probabilities for an (N, T, D) token batch under ``ckpt``."""
    tokens = np.asarray(tokens, dtype=np.float64)
    pooled = tokens.mean(axis=1) @ ckpt.projection().T
    return expit(pooled @ ckpt.head.weights + ckpt.head.bias)
