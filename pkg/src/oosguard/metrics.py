"""Evaluation metrics for OOS detection and intent classification.

Scores follow the "higher = more OOS-like" convention (the minimum
Mahalanobis distance is used directly). OOS is the positive class
throughout.

Metric design notes:
    - aupr_oos uses the step-wise average-precision sum, not trapezoidal
      interpolation (trapezoids over PR space are optimistic).
    - Ties are handled in blocks: a group of equal scores contributes a
      single PR point (AP) and half credit per pair (AUROC), which makes
      both metrics invariant to input order.
    - brute_force_pr_curve exists as an independent oracle: it re-derives
      the curve by exhaustively thresholding at every distinct score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from oosguard.data import Example
from oosguard.errors import DataError

__all__ = [
    "ScoredLabel",
    "EvaluationReport",
    "aupr_oos",
    "auroc",
    "intent_accuracy",
    "dispersion",
    "brute_force_pr_curve",
    "evaluate",
    "report_to_json_dict",
    "report_to_text",
]


@dataclass(frozen=True)
class ScoredLabel:
    """One scored test item: OOS score plus intent bookkeeping."""

    score: float
    is_oos: bool
    true_intent: int | None = None
    predicted_intent: int | None = None


@dataclass(frozen=True)
class EvaluationReport:
    """The four headline metrics plus sample counts."""

    aupr_oos: float
    auroc: float
    intent_accuracy: float
    dispersion: float
    n_is: int
    n_oos: int
    tau_used: float | None = None


def _scores_flags(items) -> tuple[np.ndarray, np.ndarray]:
    scores = np.array([it.score for it in items], dtype=np.float64)
    flags = np.array([it.is_oos for it in items], dtype=bool)
    if scores.size == 0:
        raise DataError("no scored items")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores contain non-finite values")
    return scores, flags


def aupr_oos(items) -> float:
    """Area under the precision-recall curve with OOS as the positive class.

    Average-precision formulation: walk the items by descending score in
    tie blocks; each block adds (recall gain) x (precision after the block).

    Raises:
        DataError: if no OOS item is present.
    """
    scores, flags = _scores_flags(items)
    n_pos = int(flags.sum())
    if n_pos == 0:
        raise DataError("aupr_oos needs at least one OOS item")
    order = np.argsort(-scores, kind="stable")
    tp = 0
    fp = 0
    ap = 0.0
    prev_recall = 0.0
    i = 0
    n = scores.size
    while i < n:
        j = i
        s = scores[order[i]]
        block_tp = 0
        block_fp = 0
        while j < n and scores[order[j]] == s:
            if flags[order[j]]:
                block_tp += 1
            else:
                block_fp += 1
            j += 1
        tp += block_tp
        fp += block_fp
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return ap


def auroc(items) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic.

    Equals the fraction of (OOS, IS) pairs where the OOS item scores higher,
    counting ties as one half.

    Raises:
        DataError: if either class is absent.
    """
    scores, flags = _scores_flags(items)
    n_pos = int(flags.sum())
    n_neg = int(scores.size) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("auroc needs at least one OOS and one in-scope item")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    n = scores.size
    while i < n:
        j = i
        s = scores[order[i]]
        while j < n and scores[order[j]] == s:
            j += 1
        # average 1-based rank of the tie run [i, j)
        ranks[order[i:j]] = (i + 1 + j) / 2.0
        i = j
    rank_sum = float(ranks[flags].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def intent_accuracy(items) -> float:
    """Exact-match accuracy over the in-scope items only.

    Raises:
        DataError: no in-scope items, or an in-scope item missing its true
            or predicted intent.
    """
    hits = 0
    total = 0
    for it in items:
        if it.is_oos:
            continue
        if it.true_intent is None or it.predicted_intent is None:
            raise DataError("in-scope item is missing true or predicted intent")
        total += 1
        if it.true_intent == it.predicted_intent:
            hits += 1
    if total == 0:
        raise DataError("intent_accuracy needs at least one in-scope item")
    return hits / total


def dispersion(embeddings) -> float:
    """Trace of the global covariance (single mean, 1/N normalization).

    The scalar spread statistic used to compare fine-tuning objectives:
    smaller means a tighter embedding cloud.

    Raises:
        DataError: fewer than 2 embeddings.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("dispersion needs at least 2 embeddings")
    centered = x - x.mean(axis=0)
    return float((centered * centered).sum() / x.shape[0])


def brute_force_pr_curve(items) -> list[tuple[float, float, float]]:
    """Exhaustive PR curve: one point per distinct score threshold.

    At each distinct score t (descending), predicts OOS for score >= t and
    recounts tp/fp from scratch. Quadratic; intended as a test oracle.

    Returns:
        [(threshold, precision, recall), ...] in descending threshold order.
    """
    scores, flags = _scores_flags(items)
    n_pos = int(flags.sum())
    if n_pos == 0:
        raise DataError("brute_force_pr_curve needs at least one OOS item")
    curve = []
    for t in sorted(set(scores.tolist()), reverse=True):
        predicted = scores >= t
        tp = int(np.sum(predicted & flags))
        fp = int(np.sum(predicted & ~flags))
        curve.append((t, tp / (tp + fp), tp / n_pos))
    return curve


def average_precision_from_curve(curve) -> float:
    """Fold a PR curve (descending thresholds) into the AP sum."""
    ap = 0.0
    prev_recall = 0.0
    for _, precision, recall in curve:
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def score_examples(scorer, examples: list[Example]) -> tuple[list[ScoredLabel], np.ndarray]:
    """Score every example with a fitted scorer.

    Returns:
        (scored items, (n, d) float64 embedding matrix in example order).
    """
    # local import keeps scorer -> metrics import direction acyclic
    from oosguard.scorer import embed_examples, score_batch

    emb = embed_examples(scorer, examples)
    d_min, c_min = score_batch(scorer, emb)
    items = [
        ScoredLabel(
            score=float(d_min[i]),
            is_oos=ex.is_oos,
            true_intent=None if ex.is_oos else ex.label,
            predicted_intent=int(c_min[i]),
        )
        for i, ex in enumerate(examples)
    ]
    return items, emb


def evaluate(scorer, examples: list[Example], tau: float | None = None) -> EvaluationReport:
    """Full evaluation of a fitted scorer on a mixed IS/OOS example set.

    The minimum Mahalanobis distance is the OOS score. Dispersion is
    computed over the in-scope embeddings of this set. tau is carried into
    the report but the ranking metrics never depend on it.

    Raises:
        DataError: if the set lacks OOS or IS items.
    """
    if not examples:
        raise DataError("empty evaluation set")
    items, emb = score_examples(scorer, examples)
    is_mask = np.array([not it.is_oos for it in items], dtype=bool)
    n_is = int(is_mask.sum())
    n_oos = len(items) - n_is
    return EvaluationReport(
        aupr_oos=aupr_oos(items),
        auroc=auroc(items),
        intent_accuracy=intent_accuracy(items),
        dispersion=dispersion(emb[is_mask]),
        n_is=n_is,
        n_oos=n_oos,
        tau_used=tau,
    )


def report_to_json_dict(report: EvaluationReport) -> dict:
    """The report as a JSON-ready dict with the documented key set."""
    return {
        "aupr_oos": report.aupr_oos,
        "auroc": report.auroc,
        "intent_accuracy": report.intent_accuracy,
        "dispersion": report.dispersion,
        "n_is": report.n_is,
        "n_oos": report.n_oos,
        "tau": report.tau_used,
    }


def report_to_text(report: EvaluationReport) -> str:
    """Line-oriented key=value rendering of the report."""
    lines = []
    for key, value in report_to_json_dict(report).items():
        if value is None:
            lines.append(f"{key}=none")
        elif isinstance(value, float):
            lines.append(f"{key}={value:.6f}")
        else:
            lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"
