"""Losses, their analytic gradients, and the momentum-teacher schedule.

Batch shapes used throughout: ``tokens`` is (N, T, D), ``pooled`` is (N, D),
the projector ``P`` is (D, D) and maps a token row ``x`` to ``P @ x``.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np
from scipy.special import expit, logsumexp

from featdistill.errors import InvalidArgument
from featdistill.features import FeatureMap

EPS = 1e-7


def bce_loss(probs, labels) -> float:
    """Mean binary cross-entropy with probabilities clipped to [EPS, 1 - EPS]."""
    p = np.atleast_1d(np.asarray(probs, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.float64))
    if p.size == 0:
        raise InvalidArgument("bce_loss needs at least one prediction")
    if p.shape != y.shape:
        raise InvalidArgument(f"length mismatch: {p.shape} vs {y.shape}")
    p = np.clip(p, EPS, 1.0 - EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_grad_logit(prob, label):
    """d BCE / d logit for a sigmoid output."""
    return prob - label


def _values(x):
    return x.values if isinstance(x, FeatureMap) else np.asarray(x, dtype=np.float64)


def distill_loss(current, fixed, normalize: bool = False) -> float:
    """Squared Frobenius distance between two feature maps."""
    a, b = _values(current), _values(fixed)
    if a.shape != b.shape:
        raise InvalidArgument(f"feature map shapes differ: {a.shape} vs {b.shape}")
    total = float(np.sum((a - b) ** 2))
    return total / a.size if normalize and a.size else total


def crd_loss(anchor, positive, queue, tau: float) -> float:
    """InfoNCE of one anchor against its positive and a bank of negatives."""
    a = np.asarray(anchor, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    if a.size == 0:
        raise InvalidArgument("anchor is empty")
    if tau <= 0:
        raise InvalidArgument(f"temperature must be > 0, got {tau}")
    negs = queue.as_array() if isinstance(queue, NegativeQueue) else np.asarray(queue, dtype=np.float64)
    negs = negs.reshape(-1, a.size)
    pos = float(a @ p) / tau
    logits = np.concatenate([[pos], (negs @ a) / tau])
    return float(logsumexp(logits) - pos)


class NegativeQueue:
    """FIFO bank of unit-norm keys, oldest evicted first."""

    def __init__(self, capacity: int, dim: int | None = None):
        if capacity < 0:
            raise InvalidArgument("capacity must be >= 0")
        self.capacity = int(capacity)
        self.dim = dim
        self._items: deque = deque(maxlen=self.capacity or None)

    def __len__(self):
        return len(self._items)

    def push(self, keys) -> None:
        keys = np.atleast_2d(np.asarray(keys, dtype=np.float64))
        if self.capacity == 0:
            return
        if self.dim is None:
            self.dim = keys.shape[1]
        if keys.shape[1] != self.dim:
            raise InvalidArgument(f"key dim {keys.shape[1]} != queue dim {self.dim}")
        norms = np.linalg.norm(keys, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise InvalidArgument("queue entries must be L2-normalized")
        for k in keys:
            self._items.append(k.copy())

    def as_array(self) -> np.ndarray:
        if not self._items:
            return np.zeros((0, self.dim or 0))
        return np.stack(list(self._items))


def l2_normalize(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    return x / np.linalg.norm(x, axis=axis, keepdims=True)


# ---------------------------------------------------------------- batch losses with gradients


def head_bce(weights, bias, pooled, labels):
    """Mean BCE of the logistic head and its gradient.

    Returns ``(loss, d_weights, d_bias, probs)``.
    """
    z = pooled @ weights + bias
    probs = expit(z)
    loss = bce_loss(probs, labels)
    g = bce_grad_logit(probs, labels) / len(labels)
    return loss, pooled.T @ g, float(np.sum(g)), probs


def projector_distill(P, P_teacher, tokens, normalize: bool = False):
    """Batch-mean dense alignment loss between student and teacher projections.

    ``M_current = X P^T`` and ``M_fixed = X P_teacher^T`` for each item.
    Returns ``(loss, dP)``.
    """
    n, t, d = tokens.shape
    diff = tokens @ (P - P_teacher).T  # (N, T, D)
    scale = 1.0 / n
    if normalize:
        scale /= t * d
    loss = scale * float(np.sum(diff**2))
    grad = 2.0 * scale * np.einsum("nta,ntb->ab", diff, tokens)
    return loss, grad


def projector_crd(P, xbar, keys, negatives, tau: float):
    """Batch-mean InfoNCE with student queries ``normalize(P xbar_i)``.

    ``keys`` are unit teacher embeddings of a second view of the same items,
    ``negatives`` the queued keys of earlier items.  Returns ``(loss, dP)``.
    """
    n = xbar.shape[0]
    s = xbar @ P.T
    norms = np.linalg.norm(s, axis=1, keepdims=True)
    q = s / norms
    candidates_pos = np.sum(q * keys, axis=1, keepdims=True) / tau  # (N, 1)
    logits = np.concatenate([candidates_pos, (q @ negatives.T) / tau], axis=1)
    lse = logsumexp(logits, axis=1, keepdims=True)
    loss = float(np.mean(lse - candidates_pos))
    probs = np.exp(logits - lse)  # (N, 1 + K)
    # dL/dq = (E_pi[candidate] - key) / tau
    expected = probs[:, :1] * keys + probs[:, 1:] @ negatives
    gq = (expected - keys) / tau
    gs = (gq - q * np.sum(q * gq, axis=1, keepdims=True)) / norms
    return loss, gs.T @ xbar / n


# ---------------------------------------------------------------- teacher


def momentum(step_global: int, step_total: int, m_base: float = 0.99, m_max: float = 0.9999) -> float:
    """Cosine-scheduled teacher momentum, rising from m_base at step 0 to m_max."""
    if step_total < 1:
        raise InvalidArgument(f"step_total must be >= 1, got {step_total}")
    if not 0 <= step_global <= step_total:
        raise InvalidArgument(f"step_global {step_global} outside [0, {step_total}]")
    return m_max - (m_max - m_base) * (math.cos(math.pi * step_global / step_total) + 1.0) / 2.0


def ema_update(teacher, student, m: float):
    t = np.asarray(teacher, dtype=np.float64)
    s = np.asarray(student, dtype=np.float64)
    if t.shape != s.shape:
        raise InvalidArgument(f"shape mismatch: {t.shape} vs {s.shape}")
    if not 0.0 <= m <= 1.0:
        raise InvalidArgument(f"momentum must lie in [0, 1], got {m}")
    return m * t + (1.0 - m) * s


def total_loss(bce: float, crd: float, distill: float, lambda_crd: float, w_distill: float) -> float:
    if lambda_crd < 0 or w_distill < 0:
        raise InvalidArgument("loss weights must be >= 0")
    return bce + lambda_crd * crd + w_distill * distill
