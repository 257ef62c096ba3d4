"""
Synthetic benchmark generation, sample labeling, metrics and spectral analysis.
"""

from .labeling import LabelError, classify_start, label_hard_samples, track_proportions, window_overlaps
from .metrics import EvalResult, best_f1, f1_at, point_adjust, separation_auc
from .spectral import (
    DecayResult,
    band_limited_signal,
    decay_experiment,
    decay_grid,
    frequency_gradient_decay,
    high_band_energy,
    spectrum,
    train_decay_net,
)
from .synthetic import (
    AnomalyClip,
    AnomalyKind,
    AnomalySegment,
    Benchmark,
    HardSegment,
    SyntheticSpec,
    anomaly_pool,
    build_benchmark,
    generate,
    hard_mask,
    inject_contamination,
    label_segments,
)

__all__ = [
    'AnomalyClip',
    'AnomalyKind',
    'AnomalySegment',
    'Benchmark',
    'DecayResult',
    'EvalResult',
    'HardSegment',
    'LabelError',
    'SyntheticSpec',
    'anomaly_pool',
    'band_limited_signal',
    'best_f1',
    'build_benchmark',
    'classify_start',
    'decay_experiment',
    'decay_grid',
    'f1_at',
    'frequency_gradient_decay',
    'generate',
    'hard_mask',
    'high_band_energy',
    'inject_contamination',
    'label_hard_samples',
    'label_segments',
    'point_adjust',
    'separation_auc',
    'spectrum',
    'track_proportions',
    'train_decay_net',
    'window_overlaps',
]
