"""
Contamination / hard-sample labeling of window samples and proportion tracking.
"""

from typing import Optional, Tuple

import numpy as np

from ..windows import SampleSet


class LabelError(ValueError):
    """Raised for misaligned or degenerate labels."""


def window_overlaps(flags: np.ndarray, w: int) -> np.ndarray:
    """For every stride-1 start, whether its window holds at least one flagged point."""
    flags = np.asarray(flags).astype(np.int64).reshape(-1)
    if flags.size < w:
        raise LabelError(f"flags of length {flags.size} shorter than w={w}")
    cumulative = np.concatenate([[0], np.cumsum(flags)])
    return (cumulative[w:] - cumulative[:-w]) > 0


def label_hard_samples(losses, ac_overlap, quantile: float = 0.9) -> np.ndarray:
    """
    Hard samples: windows free of contamination whose baseline loss exceeds
    the ``quantile`` of the normal (contamination-free) windows' losses.

    Args:
        losses: Baseline loss per sample
        ac_overlap: Whether each sample overlaps a contaminated point
        quantile: Loss quantile used as the threshold

    Returns:
        Boolean HS flag per sample
    """
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)
    ac_overlap = np.asarray(ac_overlap, dtype=bool).reshape(-1)
    if losses.shape != ac_overlap.shape:
        raise LabelError(f"losses ({losses.size}) and AC flags ({ac_overlap.size}) are misaligned")
    if not 0.0 <= quantile <= 1.0:
        raise LabelError(f"quantile must be in [0, 1], got {quantile}")
    normal = ~ac_overlap
    if not normal.any():
        return np.zeros(losses.size, dtype=bool)
    threshold = np.quantile(losses[normal], quantile)
    return normal & (losses > threshold)


def classify_start(start: int, ac_by_start: np.ndarray, hs_by_start: Optional[np.ndarray]) -> str:
    """'contamination' takes precedence over 'hard'; everything else is 'simple'."""
    if ac_by_start[start]:
        return "contamination"
    if hs_by_start is not None and hs_by_start[start]:
        return "hard"
    return "simple"


def track_proportions(S: SampleSet, ac_flags, hs_flags) -> Tuple[float, float]:
    """
    Fractions of ``S`` that are contaminated and hard.

    Args:
        S: Current sample set
        ac_flags: Per-point contamination flags of the underlying series
        hs_flags: Hard-sample flag per stride-1 start offset

    Returns:
        (ac_frac, hs_frac)
    """
    if len(S) == 0:
        return 0.0, 0.0
    ac_by_start = window_overlaps(ac_flags, S.w)
    hs_flags = np.asarray(hs_flags, dtype=bool).reshape(-1)
    if hs_flags.size != ac_by_start.size:
        raise LabelError(f"HS flags: expected {ac_by_start.size} starts, got {hs_flags.size}")

    starts = np.asarray(S.starts())
    is_ac = ac_by_start[starts]
    is_hs = hs_flags[starts] & ~is_ac
    return float(is_ac.mean()), float(is_hs.mean())
