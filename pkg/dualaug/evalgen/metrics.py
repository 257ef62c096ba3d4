"""
Point-adjusted best-F1 evaluation.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.stats import mannwhitneyu

from .labeling import LabelError
from .synthetic import label_segments

logger = logging.getLogger(__name__)


@dataclass
class EvalResult:
    """Best F1 over all thresholds, with the operating point that achieves it."""

    f1: float
    threshold: float
    precision: float
    recall: float
    adjusted_scores: np.ndarray = field(repr=False)

    def to_dict(self, include_scores: bool = False) -> dict:
        out = {
            "f1": self.f1,
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
        }
        if include_scores:
            out["adjusted_scores"] = self.adjusted_scores.tolist()
        return out


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).astype(np.int64).reshape(-1)
    if scores.shape != labels.shape:
        raise LabelError(f"scores ({scores.size}) and labels ({labels.size}) differ in length")
    return scores, labels


def point_adjust(scores, labels) -> np.ndarray:
    """Replace every score inside a true anomaly segment with the segment maximum."""
    scores, labels = _check(scores, labels)
    adjusted = scores.copy()
    for start, stop in label_segments(labels):
        adjusted[start:stop] = scores[start:stop].max()
    return adjusted


def best_f1(scores, labels, adjust: bool = True) -> EvalResult:
    """
    Maximum F1 over every distinct score used as threshold (predict score >= threshold).

    Ties in F1 go to the lower threshold.
    """
    scores, labels = _check(scores, labels)
    positives = int(labels.sum())
    if positives == 0 or positives == labels.size:
        raise LabelError("best F1 needs at least one positive and one negative label")

    if adjust:
        scores = point_adjust(scores, labels)

    order = np.argsort(-scores, kind="stable")
    ranked = scores[order]
    true_pos = np.cumsum(labels[order])
    # last index of each group of equal scores
    group_end = np.flatnonzero(np.append(ranked[1:] != ranked[:-1], True))
    thresholds = ranked[group_end]
    tp = true_pos[group_end]
    predicted = group_end + 1
    f1 = 2.0 * tp / (predicted + positives)

    # thresholds are descending; scan from the lowest so ties keep the lower one
    best = len(f1) - 1 - int(np.argmax(f1[::-1]))
    result = EvalResult(
        f1=float(f1[best]),
        threshold=float(thresholds[best]),
        precision=float(tp[best] / predicted[best]),
        recall=float(tp[best] / positives),
        adjusted_scores=scores,
    )
    logger.debug(f"best F1 {result.f1:.4f} at threshold {result.threshold:.6g}")
    return result


def f1_at(scores, labels, threshold: float) -> float:
    scores, labels = _check(scores, labels)
    predicted = scores >= threshold
    tp = int((predicted & (labels == 1)).sum())
    denom = int(predicted.sum()) + int(labels.sum())
    return 2.0 * tp / denom if denom else 0.0


def separation_auc(positive, negative) -> float:
    """Probability that a positive outranks a negative (Mann-Whitney U / n1 n2)."""
    positive = np.asarray(positive, dtype=np.float64)
    negative = np.asarray(negative, dtype=np.float64)
    if positive.size == 0 or negative.size == 0:
        raise LabelError("AUC needs both positive and negative scores")
    statistic, _ = mannwhitneyu(positive, negative, alternative="two-sided")
    return float(statistic / (positive.size * negative.size))
