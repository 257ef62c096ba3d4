"""
Tests for the window autoencoder
================================
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dualaug.detector import Detector, DetectorConfig, read_checkpoint
from dualaug.nncore import DimensionError, OptimizerState, forward
from dualaug.windows import SampleSet, TimeSeries, WindowBoundsError


class TestDetectorConfig:

    def test_layer_sizes_are_symmetric(self):
        cfg = DetectorConfig(w=10, n_features=2, bottleneck=4, hidden_sizes=[12, 8])
        assert cfg.layer_sizes() == [20, 12, 8, 4, 8, 12, 20]
        assert len(cfg.activations()) == 6
        assert cfg.activations()[-1].value == "identity"

    def test_bottleneck_must_compress(self):
        with pytest.raises(ValueError):
            DetectorConfig(w=4, bottleneck=4)


class TestLosses:
    """Reconstruction losses and per-point scores."""

    def test_sample_loss_matches_manual_mse(self, small_detector, sample_set):
        s = next(iter(sample_set))
        x = s.flat()
        out = forward(small_detector.net, x)
        assert small_detector.sample_loss(s) == pytest.approx(np.mean((out - x) ** 2))

    def test_batch_losses_agree_with_single(self, small_detector, sample_set):
        batch = small_detector.losses(sample_set)
        single = [small_detector.sample_loss(s) for s in sample_set]
        assert_allclose(batch, single, rtol=1e-12)

    def test_window_losses_indexed_by_start(self, small_detector, sine_series):
        losses = small_detector.window_losses(sine_series)
        assert losses.shape == (240 - 12 + 1,)
        S = SampleSet(sine_series, 12)
        assert losses[37] == pytest.approx(small_detector.sample_loss(S.add(37)))

    def test_anomaly_scores_average_covering_windows(self, small_detector, sine_series):
        scores = small_detector.anomaly_scores(sine_series)
        losses = small_detector.window_losses(sine_series)
        assert scores.shape == (240,)
        assert scores[0] == pytest.approx(losses[0])
        assert scores[5] == pytest.approx(losses[:6].mean())
        assert scores[100] == pytest.approx(losses[89:101].mean())
        assert scores[-1] == pytest.approx(losses[-1])

    def test_window_length_mismatch(self, small_detector, sine_series):
        with pytest.raises(DimensionError):
            small_detector.anomaly_scores(sine_series, w=10)

    def test_series_too_short(self, small_detector):
        with pytest.raises(WindowBoundsError):
            small_detector.anomaly_scores(TimeSeries(np.zeros(5)))

    def test_feature_mismatch(self, small_detector):
        with pytest.raises(DimensionError):
            small_detector.window_losses(TimeSeries(np.zeros((40, 2))))


class TestTraining:

    def test_train_epoch_records_every_sample(self, small_detector, sample_set, rng):
        loss_map = small_detector.train_epoch(sample_set, OptimizerState(lr=1e-3), 4, rng)
        assert sorted(loss_map) == sorted(s.id for s in sample_set)
        assert all(v >= 0 for v in loss_map.values())

    def test_training_reduces_loss(self, small_detector, sample_set, rng):
        opt = OptimizerState(lr=1e-2)
        before = small_detector.losses(sample_set).mean()
        for _ in range(60):
            small_detector.train_epoch(sample_set, opt, 8, rng)
        assert small_detector.losses(sample_set).mean() < before

    def test_empty_set_rejected(self, small_detector, sine_series, rng):
        with pytest.raises(ValueError):
            small_detector.train_epoch(SampleSet(sine_series, 12), OptimizerState(), 4, rng)


class TestDetection:
    """A detector trained on clean windows flags injected spikes."""

    @pytest.fixture
    def clean_detector(self, small_detector, sample_set, rng):
        opt = OptimizerState(lr=1e-2)
        for _ in range(60):
            small_detector.train_epoch(sample_set, opt, 4, rng)
        return small_detector

    @pytest.fixture
    def spiked(self, sine_series):
        values = sine_series.values.copy()
        values[150:153] += 8.0
        labels = np.zeros(240, dtype=int)
        labels[150:153] = 1
        return TimeSeries(values, labels, "spiked")

    def test_anomalous_points_score_higher(self, clean_detector, spiked):
        scores = clean_detector.anomaly_scores(spiked)
        far = np.ones(240, dtype=bool)
        far[150 - 12:153 + 12] = False
        assert scores[spiked.labels == 1].min() > scores[far].max()

    def test_spike_windows_have_higher_loss(self, clean_detector, spiked):
        S = SampleSet(spiked, 12)
        spike_windows = [S.add(start) for start in range(140, 151)]
        normal_windows = [S.add(start) for start in range(0, 130, 12)]
        spike_losses = [clean_detector.sample_loss(s) for s in spike_windows]
        normal_losses = [clean_detector.sample_loss(s) for s in normal_windows]
        assert min(spike_losses) > max(normal_losses)


class TestCheckpoint:

    def test_round_trip(self, small_detector, sine_series, tmp_path):
        path = tmp_path / "detector.npz"
        small_detector.save(path, {"seed": 7})
        loaded = Detector.load(path)
        assert loaded.config == small_detector.config
        assert_allclose(loaded.net.flat_params(), small_detector.net.flat_params())
        assert_allclose(loaded.anomaly_scores(sine_series), small_detector.anomaly_scores(sine_series))
        meta, _ = read_checkpoint(path, "detector")
        assert meta["seed"] == 7

    def test_wrong_kind_rejected(self, small_detector, tmp_path):
        path = tmp_path / "detector.npz"
        small_detector.save(path)
        with pytest.raises(ValueError):
            read_checkpoint(path, "agent")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            Detector.load(tmp_path / "none.npz")
