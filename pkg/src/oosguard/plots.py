"""Figure rendering for the evaluation report path.

Renders the precision-recall curve, the ROC curve, and the distance
histogram to PNG files next to the delimited report output. File output
only; no interactive backend is ever touched.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from oosguard.metrics import brute_force_pr_curve


def _roc_points(items) -> tuple[np.ndarray, np.ndarray]:
    scores = np.array([it.score for it in items])
    flags = np.array([it.is_oos for it in items], dtype=bool)
    n_pos = int(flags.sum())
    n_neg = flags.size - n_pos
    fpr = [0.0]
    tpr = [0.0]
    for t in sorted(set(scores.tolist()), reverse=True):
        predicted = scores >= t
        tpr.append(float(np.sum(predicted & flags)) / n_pos)
        fpr.append(float(np.sum(predicted & ~flags)) / n_neg)
    return np.array(fpr), np.array(tpr)


def render_report_figures(items, out_dir) -> list[Path]:
    """Write pr_curve.png, roc_curve.png, distance_histogram.png.

    Args:
        items: the scored test items the report was computed from.
        out_dir: directory to create the PNGs in (created if missing).

    Returns:
        Paths of the files written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    curve = brute_force_pr_curve(items)
    recalls = [r for _, _, r in curve]
    precisions = [p for _, p, _ in curve]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.step([0.0] + recalls, [1.0] + precisions, where="post")
    ax.set_xlabel("recall (OOS)")
    ax.set_ylabel("precision (OOS)")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title("Precision-recall, OOS positive")
    fig.tight_layout()
    path = out / "pr_curve.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fpr, tpr = _roc_points(items)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(fpr, tpr)
    ax.plot([0, 1], [0, 1], linestyle=":", color="grey")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("ROC, OOS positive")
    fig.tight_layout()
    path = out / "roc_curve.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    is_scores = [it.score for it in items if not it.is_oos]
    oos_scores = [it.score for it in items if it.is_oos]
    fig, ax = plt.subplots(figsize=(5, 4))
    bins = np.histogram_bin_edges(is_scores + oos_scores, bins=40)
    ax.hist(is_scores, bins=bins, alpha=0.6, label="in-scope")
    ax.hist(oos_scores, bins=bins, alpha=0.6, label="OOS")
    ax.set_xlabel("minimum Mahalanobis distance")
    ax.set_ylabel("count")
    ax.legend()
    ax.set_title("Distance distribution")
    fig.tight_layout()
    path = out / "distance_histogram.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    return written


def render_sweep_figure(entries, out_dir) -> Path:
    """Plot validation AUPR against alpha for a finished sweep."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    alphas = [e.alpha for e in entries]
    auprs = [e.report.aupr_oos for e in entries]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(alphas, auprs, marker="o")
    ax.set_xlabel("alpha")
    ax.set_ylabel("validation AUPR (OOS)")
    ax.set_title("Reconstruction-weight sweep")
    fig.tight_layout()
    path = out / "alpha_sweep.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
