"""Matplotlib figures written next to the text and JSON reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from featdistill.metrics import RobustReport, roc_curve  # noqa: E402

# No timestamps or version strings, so reruns produce identical bytes.
_PNG_META = {"Software": None}

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata=_PNG_META)
    plt.close(fig)


def plot_roc(scores, labels, path, title="ROC"):
    fpr, tpr = roc_curve(scores, labels)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(fpr, tpr, lw=1.5, color="C0")
        ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="0.5")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_operator_auc(report: RobustReport, path):
    ops = sorted(report.per_operator)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, max(2.0, 0.22 * len(ops) + 1.0)))
        if ops:
            vals = [report.per_operator[o] for o in ops]
            ax.barh(range(len(ops)), vals, color="C1")
            ax.set_yticks(range(len(ops)))
            ax.set_yticklabels(ops, fontsize=7)
            ax.axvline(report.overall_auc, color="k", lw=0.8, ls="--", label="overall")
            ax.legend(loc="lower right", fontsize=7)
        ax.set_xlim(0, 1)
        ax.set_xlabel("ROC AUC")
        ax.set_title("AUC by distortion operator")
        fig.tight_layout()
        _save(fig, path)


def plot_severity_auc(report: RobustReport, path):
    sev = sorted(report.per_severity)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if sev:
            ax.plot(sev, [report.per_severity[s] for s in sev], marker="o", color="C2")
        ax.axhline(report.overall_auc, color="k", lw=0.8, ls="--")
        ax.set_xticks([1, 2, 3, 4, 5])
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("severity")
        ax.set_ylabel("ROC AUC")
        ax.set_title("AUC by severity")
        fig.tight_layout()
        _save(fig, path)


def plot_training_log(entries, path, title="training loss"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for stage, colour in ((1, "C0"), (2, "C3")):
            pts = [(i, e["loss_total"]) for i, e in enumerate(entries) if e["stage"] == stage]
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=1.0, color=colour, label=f"stage {stage}")
        ax.set_xlabel("step")
        ax.set_ylabel("loss")
        ax.set_title(title)
        ax.legend(fontsize=7)
        fig.tight_layout()
        _save(fig, path)


def write_report_figures(report: RobustReport, scores, labels, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [out_dir / "roc.png", out_dir / "auc_by_operator.png", out_dir / "auc_by_severity.png"]
    plot_roc(scores, labels, paths[0], title=f"ROC (AUC = {report.overall_auc:.4f})")
    plot_operator_auc(report, paths[1])
    plot_severity_auc(report, paths[2])
    return paths
