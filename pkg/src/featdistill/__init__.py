"""Robust AI-generated image detection at desk scale.

Degradation library, two-stage classification plus feature distillation
trainer, soft-voting expert ensemble and robust ROC-AUC evaluation.
"""

__version__ = "0.1.0"
