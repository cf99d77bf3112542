"""ROC-AUC with midrank ties, and robustness breakdowns by operator and severity."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from featdistill.errors import InvalidArgument


@dataclass(frozen=True)
class ScoredItem:
    score: float
    label: int
    distortion_tag: str | None = None
    severity: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise InvalidArgument(f"score must be finite, got {self.score}")
        if self.label not in (0, 1):
            raise InvalidArgument(f"label must be 0 or 1, got {self.label}")


def auc_from_scores(scores, labels) -> float:
    """Mann-Whitney U / (n0 * n1), ties credited 0.5, in O(n log n)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n1 = int(np.sum(labels == 1))
    n0 = int(labels.size - n1)
    if n0 == 0 or n1 == 0:
        raise InvalidArgument("roc_auc needs both classes present")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    midrank = upper - (counts - 1) / 2.0  # 1-based average rank of each tie group
    rank_sum = float(np.sum(midrank[inverse][labels == 1]))
    u = rank_sum - n1 * (n1 + 1) / 2.0
    return u / (n0 * n1)


def roc_auc(items: Sequence[ScoredItem]) -> float:
    return auc_from_scores([it.score for it in items], [it.label for it in items])


def roc_curve(scores, labels):
    """(false positive rate, true positive rate) over all distinct thresholds."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    distinct = np.r_[np.nonzero(np.diff(s))[0], y.size - 1]
    tp = np.cumsum(y == 1)[distinct]
    fp = np.cumsum(y == 0)[distinct]
    tpr = np.r_[0.0, tp / max(tp[-1], 1)]
    fpr = np.r_[0.0, fp / max(fp[-1], 1)]
    return fpr, tpr


@dataclass
class RobustReport:
    overall_auc: float
    per_operator: dict[str, float] = field(default_factory=dict)
    per_severity: dict[int, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    absent: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "overall_auc": self.overall_auc,
            "per_operator": dict(sorted(self.per_operator.items())),
            "per_severity": {str(k): v for k, v in sorted(self.per_severity.items())},
            "counts": dict(self.counts),
            "absent": list(self.absent),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_table(self) -> str:
        rows = [("group", "n", "auc"), ("overall", str(self.counts.get("overall", 0)), f"{self.overall_auc:.6f}")]
        for op, auc in sorted(self.per_operator.items()):
            rows.append((f"op:{op}", str(self.counts.get(f"operator:{op}", 0)), f"{auc:.6f}"))
        for sev, auc in sorted(self.per_severity.items()):
            rows.append((f"severity:{sev}", str(self.counts.get(f"severity:{sev}", 0)), f"{auc:.6f}"))
        for name in self.absent:
            rows.append((name, str(self.counts.get(name, 0)), "absent"))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = [f"{r[0]:<{widths[0]}}  {r[1]:>{widths[1]}}  {r[2]:>{widths[2]}}" for r in rows]
        return "\n".join(lines) + "\n"


def _group_auc(items):
    labels = {it.label for it in items}
    return roc_auc(items) if labels == {0, 1} else None


def robust_report(items: Sequence[ScoredItem]) -> RobustReport:
    """Overall AUC plus per-operator and per-severity AUCs.

    Groups holding a single class are listed in ``absent`` instead of being
    scored.
    """
    items = list(items)
    report = RobustReport(roc_auc(items), counts={"overall": len(items)})
    by_op: dict[str, list] = {}
    by_sev: dict[int, list] = {}
    for it in items:
        if it.distortion_tag is not None:
            by_op.setdefault(it.distortion_tag, []).append(it)
        if it.severity is not None:
            by_sev.setdefault(int(it.severity), []).append(it)
    for op in sorted(by_op):
        key = f"operator:{op}"
        report.counts[key] = len(by_op[op])
        auc = _group_auc(by_op[op])
        if auc is None:
            report.absent.append(key)
        else:
            report.per_operator[op] = auc
    for sev in sorted(by_sev):
        key = f"severity:{sev}"
        report.counts[key] = len(by_sev[sev])
        auc = _group_auc(by_sev[sev])
        if auc is None:
            report.absent.append(key)
        else:
            report.per_severity[sev] = auc
    return report
