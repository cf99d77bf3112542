"""Two-stage classification plus feature-distillation trainer."""

from featdistill.training.checkpoint import Checkpoint, read_checkpoint, write_checkpoint
from featdistill.training.losses import (
    EPS,
    NegativeQueue,
    bce_grad_logit,
    bce_loss,
    crd_loss,
    distill_loss,
    ema_update,
    momentum,
    total_loss,
)
from featdistill.training.trainer import (
    FeatureBatch,
    TeacherMode,
    TrainConfig,
    predict_tokens,
    train_stage1,
    train_stage2,
)

__all__ = [
    "EPS",
    "Checkpoint",
    "FeatureBatch",
    "NegativeQueue",
    "TeacherMode",
    "TrainConfig",
    "bce_grad_logit",
    "bce_loss",
    "crd_loss",
    "distill_loss",
    "ema_update",
    "momentum",
    "predict_tokens",
    "read_checkpoint",
    "total_loss",
    "train_stage1",
    "train_stage2",
    "write_checkpoint",
]
