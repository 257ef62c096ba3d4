"""
SYNTHETIC CONTAMINATED BENCHMARK
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Periodic multivariate series with labeled anomaly segments (spikes, level
shifts, frequency shifts), rare-but-normal hard segments, and injection
of test anomalies into the training series.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from ..windows import TimeSeries

logger = logging.getLogger(__name__)


class AnomalyKind(str, Enum):
    SPIKE = "spike"
    LEVEL_SHIFT = "level_shift"
    FREQ_SHIFT = "freq_shift"


@dataclass
class AnomalySegment:
    start: int
    length: int
    kind: AnomalyKind

    def __post_init__(self):
        self.kind = AnomalyKind(self.kind)

    @property
    def stop(self) -> int:
        return self.start + self.length


@dataclass
class HardSegment:
    start: int
    length: int
    jitter: float

    @property
    def stop(self) -> int:
        return self.start + self.length


@dataclass
class AnomalyClip:
    """An anomalous stretch cut from a labeled series."""

    values: np.ndarray
    kind: Optional[AnomalyKind] = None

    @property
    def length(self) -> int:
        return self.values.shape[0]


@dataclass
class SyntheticSpec:
    """
    Sum-of-sinusoids base signal plus noise, with anomaly and hard segments.

    Frequencies are in cycles per timestep; phases default to a per-dimension
    draw from the generation seed.
    """

    n_points: int = 3000
    n_features: int = 1
    frequencies: List[float] = field(default_factory=lambda: [0.02, 0.05])
    amplitudes: List[float] = field(default_factory=lambda: [1.0, 0.5])
    phases: Optional[List[float]] = None
    noise: float = 0.05
    anomaly_segments: List[AnomalySegment] = field(default_factory=list)
    hard_segments: List[HardSegment] = field(default_factory=list)

    def __post_init__(self):
        if self.n_points < 1 or self.n_features < 1:
            raise ValueError(f"n_points and n_features must be positive, got {self.n_points}, {self.n_features}")
        if len(self.frequencies) != len(self.amplitudes):
            raise ValueError("frequencies and amplitudes must have equal length")
        if self.phases is not None and len(self.phases) != len(self.frequencies):
            raise ValueError("phases must match frequencies")
        if self.noise < 0:
            raise ValueError(f"noise must be nonnegative, got {self.noise}")
        self.validate_segments()

    def validate_segments(self):
        spans = []
        for seg in [*self.anomaly_segments, *self.hard_segments]:
            if seg.length < 1 or seg.start < 0 or seg.stop > self.n_points:
                raise ValueError(f"segment {seg} outside series of length {self.n_points}")
            spans.append((seg.start, seg.stop))
        for seg in self.anomaly_segments:
            for hard in self.hard_segments:
                if seg.start < hard.stop and hard.start < seg.stop:
                    raise ValueError(f"anomaly segment {seg} overlaps hard segment {hard}")

    @property
    def peak(self) -> float:
        return float(sum(abs(a) for a in self.amplitudes)) or 1.0

    @classmethod
    def randomized(
        cls,
        rng: np.random.Generator,
        n_points: int = 3000,
        n_features: int = 1,
        frequencies: Sequence[float] = (0.02, 0.05),
        amplitudes: Sequence[float] = (1.0, 0.5),
        noise: float = 0.05,
        n_anomalies: int = 12,
        anomaly_length: Tuple[int, int] = (20, 60),
        anomaly_kinds: Sequence[AnomalyKind] = tuple(AnomalyKind),
        n_hard: int = 6,
        hard_length: Tuple[int, int] = (30, 60),
        jitter: float = 0.6,
    ) -> 'SyntheticSpec':
        """Place non-overlapping anomaly and hard segments at random."""
        occupied = np.zeros(n_points, dtype=bool)

        def place(length: int) -> int:
            for _ in range(1000):
                start = int(rng.integers(0, n_points - length + 1))
                # one-point gap keeps segments from merging into one label run
                lo, hi = max(0, start - 1), min(n_points, start + length + 1)
                if not occupied[lo:hi].any():
                    occupied[start:start + length] = True
                    return start
            raise ValueError(f"could not place a segment of length {length} in {n_points} points")

        kinds = [AnomalyKind(k) for k in anomaly_kinds]
        anomalies = []
        for i in range(n_anomalies):
            length = int(rng.integers(anomaly_length[0], anomaly_length[1] + 1))
            anomalies.append(AnomalySegment(place(length), length, kinds[i % len(kinds)]))
        hard = []
        for _ in range(n_hard):
            length = int(rng.integers(hard_length[0], hard_length[1] + 1))
            hard.append(HardSegment(place(length), length, jitter))

        return cls(
            n_points=n_points,
            n_features=n_features,
            frequencies=list(frequencies),
            amplitudes=list(amplitudes),
            noise=noise,
            anomaly_segments=sorted(anomalies, key=lambda s: s.start),
            hard_segments=sorted(hard, key=lambda s: s.start),
        )


def _base_signal(spec: SyntheticSpec, t: np.ndarray, phases: np.ndarray, scale: float = 1.0,
                 shift: float = 0.0, freq_factor: float = 1.0) -> np.ndarray:
    """Sinusoid sum at timesteps ``t`` for every dimension, shape (len(t), D)."""
    out = np.zeros((t.size, spec.n_features))
    for k, (f, a) in enumerate(zip(spec.frequencies, spec.amplitudes)):
        angle = 2 * np.pi * f * freq_factor * t[:, None] + phases[k][None, :] + shift
        out += scale * a * np.sin(angle)
    return out


def _apply_hard(values: np.ndarray, spec: SyntheticSpec, phases: np.ndarray):
    for seg in spec.hard_segments:
        t = np.arange(seg.start, seg.stop)
        values[seg.start:seg.stop] += (
            _base_signal(spec, t, phases, scale=1.0 + seg.jitter, shift=seg.jitter * np.pi / 2)
            - _base_signal(spec, t, phases)
        )


def _apply_anomaly(values: np.ndarray, seg: AnomalySegment, spec: SyntheticSpec,
                   phases: np.ndarray, rng: np.random.Generator):
    span = slice(seg.start, seg.stop)
    shape = (seg.length, spec.n_features)
    if seg.kind is AnomalyKind.SPIKE:
        signs = rng.choice([-1.0, 1.0], size=shape)
        hits = rng.random(shape) < 0.5
        hits[seg.length // 2] = True
        values[span] += 2.0 * spec.peak * signs * hits
    elif seg.kind is AnomalyKind.LEVEL_SHIFT:
        direction = rng.choice([-1.0, 1.0], size=(1, spec.n_features))
        values[span] += 1.5 * spec.peak * direction
    else:
        t = np.arange(seg.start, seg.stop)
        values[span] += _base_signal(spec, t, phases, freq_factor=4.0) - _base_signal(spec, t, phases)


def generate(spec: SyntheticSpec, seed: int) -> Tuple[TimeSeries, TimeSeries]:
    """
    Generate a clean training series and a labeled test series.

    Both carry the hard segments (as normal data); only the test series
    carries anomaly segments, labeled 1 exactly on their points.
    """
    spec.validate_segments()
    rng = np.random.default_rng(seed)
    if spec.phases is None:
        phases = rng.uniform(0, 2 * np.pi, size=(len(spec.frequencies), spec.n_features))
    else:
        phases = np.repeat(np.asarray(spec.phases, dtype=np.float64)[:, None], spec.n_features, axis=1)

    t = np.arange(spec.n_points)
    series = []
    for _ in range(2):
        values = _base_signal(spec, t, phases) + spec.noise * rng.standard_normal((spec.n_points, spec.n_features))
        _apply_hard(values, spec, phases)
        series.append(values)
    train_values, test_values = series

    labels = np.zeros(spec.n_points, dtype=np.int64)
    for seg in spec.anomaly_segments:
        _apply_anomaly(test_values, seg, spec, phases, rng)
        labels[seg.start:seg.stop] = 1

    logger.debug(
        f"Generated series: N={spec.n_points}, D={spec.n_features}, "
        f"{len(spec.anomaly_segments)} anomaly / {len(spec.hard_segments)} hard segments"
    )
    return TimeSeries(train_values, None, "train"), TimeSeries(test_values, labels, "test")


def hard_mask(spec: SyntheticSpec) -> np.ndarray:
    mask = np.zeros(spec.n_points, dtype=bool)
    for seg in spec.hard_segments:
        mask[seg.start:seg.stop] = True
    return mask


def label_segments(labels: np.ndarray) -> List[Tuple[int, int]]:
    """Maximal runs of 1s as (start, stop) pairs."""
    labels = np.asarray(labels).astype(np.int8)
    edges = np.diff(np.concatenate([[0], labels, [0]]))
    return list(zip(np.flatnonzero(edges == 1).tolist(), np.flatnonzero(edges == -1).tolist()))


def anomaly_pool(test: TimeSeries) -> List[AnomalyClip]:
    """Every labeled anomaly segment of ``test`` as a clip."""
    if test.labels is None:
        raise ValueError(f"series '{test.name}' has no labels to cut anomalies from")
    return [AnomalyClip(test.values[a:b].copy()) for a, b in label_segments(test.labels)]


def inject_contamination(
    train: TimeSeries,
    pool: Sequence[AnomalyClip],
    ratio: float,
    rng: np.random.Generator,
    protected: Optional[np.ndarray] = None,
) -> TimeSeries:
    """
    Paste pool anomalies over random stretches of ``train`` until at least
    ``ratio`` of its points are flagged.

    Args:
        train: Clean training series
        pool: Anomaly clips; each is used at most once
        ratio: Target flagged fraction in [0, 0.5]
        rng: Generator for clip order and placement
        protected: Optional mask of points that must not be overwritten

    Returns:
        Contaminated copy whose labels are the per-point AC flags
    """
    if not 0.0 <= ratio <= 0.5:
        raise ValueError(f"contamination ratio must be in [0, 0.5], got {ratio}")

    values = train.values.copy()
    flags = np.zeros(train.n_points, dtype=np.int64)
    if ratio == 0.0:
        return TimeSeries(values, flags, train.name)

    if len(pool) == 0:
        raise ValueError("anomaly pool is empty")
    needed = int(np.ceil(ratio * train.n_points))
    if sum(c.length for c in pool) < needed:
        raise ValueError(
            f"anomaly pool too small: {sum(c.length for c in pool)} points available, {needed} needed"
        )

    blocked = np.zeros(train.n_points, dtype=bool) if protected is None else np.asarray(protected, dtype=bool).copy()
    for i in rng.permutation(len(pool)):
        if flags.sum() >= needed:
            break
        clip = pool[i]
        if clip.values.shape[1] != train.n_features:
            raise ValueError(f"clip has {clip.values.shape[1]} features, series has {train.n_features}")
        for _ in range(1000):
            start = int(rng.integers(0, train.n_points - clip.length + 1))
            if not blocked[start:start + clip.length].any():
                break
        else:
            raise ValueError(f"no free stretch of length {clip.length} left for contamination")
        values[start:start + clip.length] = clip.values
        flags[start:start + clip.length] = 1
        blocked[start:start + clip.length] = True

    if flags.sum() < needed:
        raise ValueError(f"anomaly pool too small for ratio {ratio}")

    logger.info(f"Injected contamination: {flags.mean():.3f} of points flagged (target {ratio:.3f})")
    return TimeSeries(values, flags, train.name)


@dataclass
class Benchmark:
    """A contaminated training series, its labeled test series and audit masks."""

    spec: SyntheticSpec
    train: TimeSeries
    test: TimeSeries
    hard: np.ndarray
    ratio: float

    @property
    def ac_flags(self) -> np.ndarray:
        return self.train.labels

    @property
    def achieved_ratio(self) -> float:
        return float(self.train.labels.mean())


def build_benchmark(data, seed: int) -> Benchmark:
    """
    Generate and contaminate a benchmark from a data config.

    Args:
        data: ``DataConfig`` (or any object with the same fields)
        seed: Generation seed
    """
    rng = np.random.default_rng(seed)
    spec = SyntheticSpec.randomized(
        rng,
        n_points=data.n_points,
        n_features=data.n_features,
        frequencies=data.frequencies,
        amplitudes=data.amplitudes,
        noise=data.noise,
        n_anomalies=data.n_anomalies,
        anomaly_length=tuple(data.anomaly_length),
        anomaly_kinds=data.anomaly_kinds,
        n_hard=data.n_hard,
        hard_length=tuple(data.hard_length),
        jitter=data.jitter,
    )
    train, test = generate(spec, seed)
    hard = hard_mask(spec)
    train = inject_contamination(train, anomaly_pool(test), data.contamination, rng, protected=hard)
    return Benchmark(spec, train, test, hard, data.contamination)
