"""
SLIDING-WINDOW SAMPLES
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Time-series storage, the window-sample registry, the expand/preserve/delete
action semantics over window start offsets, and the state-transition rule
that picks the next sample to investigate.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from math import gcd
from pathlib import Path
from typing import Collection, Dict, Iterator, List, Optional, Set, Tuple
import logging

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class WindowBoundsError(ValueError):
    """Raised when a window does not fit inside its series."""


class Action(IntEnum):
    EXPAND = 0
    PRESERVE = 1
    DELETE = 2


ALL_ACTIONS: Tuple[Action, ...] = (Action.EXPAND, Action.PRESERVE, Action.DELETE)


@dataclass
class TimeSeries:
    """
    Multivariate observations with optional 0/1 point labels.

    Args:
        values: N x D matrix (a 1-D array is read as D=1)
        labels: Optional 0/1 vector of length N
        name: Series name used in reports
    """

    values: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = "series"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"series values must be N x D with N, D >= 1, got shape {values.shape}")
        self.values = values

        if self.labels is not None:
            labels = np.asarray(self.labels).astype(np.int64).reshape(-1)
            if labels.shape[0] != values.shape[0]:
                raise ValueError(f"labels: expected length {values.shape[0]}, got {labels.shape[0]}")
            if not np.isin(labels, (0, 1)).all():
                raise ValueError("labels must be 0/1")
            self.labels = labels

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def window(self, start: int, w: int) -> np.ndarray:
        """Contents of the window [start, start + w) as a w x D array."""
        if start < 0 or w < 1 or start + w > self.n_points:
            raise WindowBoundsError(
                f"window [{start}, {start + w}) outside series '{self.name}' of length {self.n_points}"
            )
        return self.values[start:start + w]

    def all_windows(self, w: int) -> np.ndarray:
        """Every stride-1 window flattened, shape (N - w + 1, w * D)."""
        if self.n_points < w:
            raise WindowBoundsError(f"series '{self.name}' has {self.n_points} points, shorter than w={w}")
        view = np.lib.stride_tricks.sliding_window_view(self.values, w, axis=0)
        return np.ascontiguousarray(view.transpose(0, 2, 1)).reshape(view.shape[0], -1)

    def slice(self, start: int, stop: int, name: Optional[str] = None) -> 'TimeSeries':
        labels = None if self.labels is None else self.labels[start:stop].copy()
        return TimeSeries(self.values[start:stop].copy(), labels, name or self.name)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=[f"x{d}" for d in range(self.n_features)])
        if self.labels is not None:
            frame["label"] = self.labels
        return frame

    def write_csv(self, path):
        """Write one row per timestep, columns x0..x{D-1} and optional label."""
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        logger.debug(f"Wrote series '{self.name}' ({self.n_points}x{self.n_features}) to {path}")

    @classmethod
    def read_csv(cls, path, name: Optional[str] = None) -> 'TimeSeries':
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"series file not found: {path}")
        frame = pd.read_csv(path)
        labels = frame.pop("label").to_numpy() if "label" in frame.columns else None
        return cls(frame.to_numpy(dtype=np.float64), labels, name or path.stem)


@dataclass(frozen=True)
class WindowSample:
    """One training sample: the window [start, start + w) of ``series``."""

    id: int
    start: int
    w: int
    series: TimeSeries = field(repr=False, compare=False)

    def __post_init__(self):
        if self.start < 0 or self.start + self.w > self.series.n_points:
            raise WindowBoundsError(
                f"sample {self.id}: window [{self.start}, {self.start + self.w}) "
                f"outside series of length {self.series.n_points}"
            )

    def contents(self) -> np.ndarray:
        return self.series.window(self.start, self.w)

    def flat(self) -> np.ndarray:
        return self.contents().reshape(-1)


class SampleSet:
    """
    The mutable training set: window samples keyed by start offset.

    Iteration is in ascending start order. Every inserted sample gets a
    fresh id, so a start that is deleted and re-added is a new sample.
    """

    def __init__(self, series: TimeSeries, w: int):
        if w < 1:
            raise ValueError(f"window length must be positive, got {w}")
        self.series = series
        self.w = w
        self._by_start: Dict[int, WindowSample] = {}
        self._next_id = 0
        self.guard_events = 0

    @property
    def max_start(self) -> int:
        return self.series.n_points - self.w

    def __len__(self) -> int:
        return len(self._by_start)

    def __iter__(self) -> Iterator[WindowSample]:
        for start in sorted(self._by_start):
            yield self._by_start[start]

    def __contains__(self, sample: WindowSample) -> bool:
        current = self._by_start.get(sample.start)
        return current is not None and current.id == sample.id

    def starts(self) -> List[int]:
        return sorted(self._by_start)

    def get(self, start: int) -> Optional[WindowSample]:
        return self._by_start.get(start)

    def add(self, start: int) -> Optional[WindowSample]:
        """Insert a window at ``start``; returns None for out-of-range or duplicate starts."""
        if start < 0 or start > self.max_start or start in self._by_start:
            return None
        sample = WindowSample(self._next_id, start, self.w, self.series)
        self._next_id += 1
        self._by_start[start] = sample
        return sample

    def remove(self, sample: WindowSample):
        if sample not in self:
            raise KeyError(f"sample {sample.id} (start {sample.start}) is not in the set")
        del self._by_start[sample.start]

    def matrix(self) -> np.ndarray:
        """Flattened contents of all samples in start order, shape (|S|, w * D)."""
        return np.stack([s.flat() for s in self]) if len(self) else np.zeros((0, self.w * self.series.n_features))

    def copy(self) -> 'SampleSet':
        other = SampleSet(self.series, self.w)
        other._by_start = dict(self._by_start)
        other._next_id = self._next_id
        other.guard_events = self.guard_events
        return other

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(s.id, s.start, s.w) for s in self],
            columns=["id", "start", "w"],
        )

    def write_csv(self, path):
        self.to_frame().to_csv(path, index=False)


def initial_windows(x: TimeSeries, w: int) -> SampleSet:
    """No-overlap windows at starts 0, w, 2w, ...; a trailing partial window is dropped."""
    if x.n_points < w:
        raise WindowBoundsError(f"series '{x.name}' has {x.n_points} points, shorter than w={w}")
    sample_set = SampleSet(x, w)
    for start in range(0, x.n_points - w + 1, w):
        sample_set.add(start)
    logger.debug(f"Initial sample set: {len(sample_set)} windows of length {w}")
    return sample_set


def coprime_split(w: int) -> Tuple[int, int]:
    """
    Split ``w`` into coprime offsets w1 < w2 with w1 + w2 = w.

    Odd w gives ((w-1)/2, (w+1)/2); even w searches outward from w/2.
    """
    if w < 3:
        raise ValueError(f"coprime split needs w >= 3, got {w}")
    if w % 2:
        return (w - 1) // 2, (w + 1) // 2
    w1 = w // 2
    while w1 >= 1:
        w2 = w - w1
        if w1 < w2 and gcd(w1, w2) == 1:
            return w1, w2
        w1 -= 1
    raise ValueError(f"no coprime split for w={w}")


def expansion_offsets(w: int) -> Tuple[int, int, int, int]:
    w1, w2 = coprime_split(w)
    return -w1, +w2, -w2, +w1


def apply_action(S: SampleSet, s: WindowSample, a: Action) -> SampleSet:
    """
    Mutate ``S`` by the action taken on ``s``.

    Expansion inserts the four offset windows, skipping out-of-range and
    duplicate starts. Deleting the last remaining sample degrades to
    preserve and counts a guard event on ``S``.
    """
    if s not in S:
        raise KeyError(f"sample {s.id} (start {s.start}) is not in the set")

    a = Action(a)
    if a is Action.EXPAND:
        added = [S.add(s.start + off) for off in expansion_offsets(S.w)]
        logger.debug(f"expand {s.start}: added {[x.start for x in added if x is not None]}")
    elif a is Action.DELETE:
        if len(S) == 1:
            S.guard_events += 1
            logger.warning(f"Refused to delete the last sample (start {s.start}); kept as preserve")
        else:
            S.remove(s)
    return S


def reachable_offsets(w: int, bound: int) -> Set[int]:
    """Offsets reachable from 0 by sums of the expansion steps, staying within +-bound."""
    steps = expansion_offsets(w)
    seen = {0}
    queue = deque([0])
    while queue:
        current = queue.popleft()
        for step in steps:
            nxt = current + step
            if abs(nxt) <= bound and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def window_distance(a: WindowSample, b: WindowSample) -> float:
    """Euclidean distance between the flattened window contents."""
    xa, xb = a.contents(), b.contents()
    if xa.shape != xb.shape:
        raise ValueError(f"window shapes differ: {xa.shape} vs {xb.shape}")
    return float(np.linalg.norm(xa.reshape(-1) - xb.reshape(-1)))


def transition(
    S: SampleSet,
    s_t: WindowSample,
    a_t: Action,
    p_explore: float,
    rng: np.random.Generator,
    exclude: Collection[int] = (),
) -> WindowSample:
    """
    Choose the next sample to investigate.

    With probability ``p_explore`` a uniform member of ``S``; otherwise the
    member nearest to ``s_t`` (expand, delete) or farthest from it
    (preserve). ``s_t`` is excluded while alternatives exist; ties go to
    the lower start.

    Starts in ``exclude`` are skipped by the nearest/farthest rule unless
    nothing else is left; the random draw still covers them.
    """
    if len(S) == 0:
        raise ValueError("transition needs a nonempty sample set")

    members = list(S)
    if len(members) == 1:
        return members[0]

    if rng.random() < p_explore:
        return members[int(rng.integers(len(members)))]

    candidates = [m for m in members if m.start != s_t.start]
    skip = set(exclude)
    if skip:
        candidates = [m for m in candidates if m.start not in skip] or candidates
    reference = s_t.flat()
    distances = np.linalg.norm(np.stack([m.flat() for m in candidates]) - reference, axis=1)
    if Action(a_t) is Action.PRESERVE:
        return candidates[int(np.argmax(distances))]
    return candidates[int(np.argmin(distances))]
