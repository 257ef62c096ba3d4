"""
Shared fixtures and the --runslow switch.
"""

import numpy as np
import pytest

from dualaug.config import DataConfig, RunConfig
from dualaug.detector import Detector, DetectorConfig
from dualaug.windows import TimeSeries, initial_windows


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow statistical experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-seed experiments, skipped without --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def sine_series():
    """Clean two-tone series of 240 points."""
    t = np.arange(240)
    values = np.sin(2 * np.pi * 0.05 * t) + 0.5 * np.sin(2 * np.pi * 0.11 * t)
    return TimeSeries(values, None, "sine")


@pytest.fixture
def small_detector(rng):
    return Detector(DetectorConfig(w=12, bottleneck=3, hidden_sizes=[6]), rng=rng)


@pytest.fixture
def sample_set(sine_series):
    return initial_windows(sine_series, 12)


@pytest.fixture
def tiny_data():
    """Small synthetic benchmark settings for end-to-end tests."""
    return DataConfig(
        n_points=600,
        n_anomalies=6,
        anomaly_length=(10, 20),
        n_hard=2,
        hard_length=(10, 20),
        contamination=0.1,
    )


@pytest.fixture
def tiny_run():
    """Fast run settings: short windows, few epochs, small networks."""
    return RunConfig(
        w=12,
        e=2,
        k=50,
        n_iters=20,
        warm_start_steps=16,
        m=64,
        max_epochs=3,
        patience=2,
        reference_epochs=1,
        detector={'hidden_sizes': [6], 'bottleneck': 3, 'batch_size': 16},
        agent={'hidden_sizes': [8], 'minibatch': 8},
    )
