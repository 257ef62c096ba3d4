"""
REFERENCE DETECTOR
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Fully-connected window autoencoder: reconstruction loss per sample,
per-point anomaly scores, and mini-batch training over a sample set.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional
import json
import logging

import numpy as np
import torch

from .nncore import Activation, DimensionError, Network, OptimizerState, as_tensor, optimizer_step
from .windows import SampleSet, TimeSeries, WindowBoundsError, WindowSample

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "dualaug-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class DetectorConfig:
    """Window length, feature dimension and autoencoder shape."""

    w: int
    n_features: int = 1
    bottleneck: int = 8
    hidden_sizes: List[int] = field(default_factory=lambda: [16])

    def __post_init__(self):
        if self.w < 1 or self.n_features < 1 or self.bottleneck < 1:
            raise ValueError(f"w, n_features and bottleneck must be positive: {self}")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden sizes must be positive, got {self.hidden_sizes}")
        if self.bottleneck >= self.input_size:
            raise ValueError(
                f"bottleneck {self.bottleneck} must be smaller than w*D = {self.input_size}"
            )

    @property
    def input_size(self) -> int:
        return self.w * self.n_features

    def layer_sizes(self) -> List[int]:
        hidden = list(self.hidden_sizes)
        return [self.input_size, *hidden, self.bottleneck, *reversed(hidden), self.input_size]

    def activations(self) -> List[Activation]:
        n_layers = len(self.layer_sizes()) - 1
        return [Activation.TANH] * (n_layers - 1) + [Activation.IDENTITY]


def write_checkpoint(path, kind: str, net: Network, header: dict):
    """Store a network as an .npz archive: JSON header plus flat float64 parameters."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "layer_sizes": net.layer_sizes,
        "activations": [a.value for a in net.activations],
        **header,
    }
    path = Path(path)
    with open(path, "wb") as f:
        np.savez(f, header=np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8),
                 params=net.flat_params())
    logger.info(f"Saved {kind} checkpoint to {path}")


def read_checkpoint(path, kind: str):
    """Load (header, Network) from an .npz checkpoint written by ``write_checkpoint``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path) as archive:
        meta = json.loads(archive["header"].tobytes().decode("utf-8"))
        params = archive["params"].astype(np.float64)
    if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint format {meta.get('format')} v{meta.get('version')}")
    if meta.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind} checkpoint, found {meta.get('kind')}")
    net = Network(meta["layer_sizes"], [Activation(a) for a in meta["activations"]], params)
    return meta, net


class Detector:
    """Autoencoder over flattened windows; the model being trained and augmented for."""

    def __init__(
        self,
        config: DetectorConfig,
        net: Optional[Network] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        """
        Initialize detector.

        Args:
            config: Detector shape
            net: Existing network (input and output size must equal w*D)
            rng: Generator for weight initialization when ``net`` is None
        """
        self.config = config
        if net is None:
            rng = rng if rng is not None else np.random.default_rng()
            net = Network.build(config.layer_sizes(), config.activations(), rng)
        if net.n_inputs != config.input_size or net.n_outputs != config.input_size:
            raise DimensionError("detector network input/output", config.input_size, net.n_inputs)
        self.net = net

    @property
    def w(self) -> int:
        return self.config.w

    def clone(self) -> 'Detector':
        return Detector(self.config, self.net.clone())

    def _check_sample(self, s: WindowSample):
        if s.w != self.w or s.series.n_features != self.config.n_features:
            raise DimensionError("sample window (w*D)", self.config.input_size, s.w * s.series.n_features)

    def reconstruction_losses(self, windows: np.ndarray) -> np.ndarray:
        """Mean squared reconstruction error of each flattened window row."""
        if windows.shape[0] == 0:
            return np.zeros(0)
        x = self.net.check_inputs(as_tensor(windows))
        with torch.no_grad():
            out = self.net.apply(x)
            return ((out - x) ** 2).mean(dim=1).numpy().copy()

    def sample_loss(self, s: WindowSample) -> float:
        """Mean squared reconstruction error over the flattened window."""
        self._check_sample(s)
        return float(self.reconstruction_losses(s.flat()[None, :])[0])

    def losses(self, samples: Iterable[WindowSample]) -> np.ndarray:
        samples = list(samples)
        for s in samples:
            self._check_sample(s)
        if not samples:
            return np.zeros(0)
        return self.reconstruction_losses(np.stack([s.flat() for s in samples]))

    def window_losses(self, series: TimeSeries) -> np.ndarray:
        """Loss of every stride-1 window, indexed by start offset."""
        if series.n_features != self.config.n_features:
            raise DimensionError("series features", self.config.n_features, series.n_features)
        return self.reconstruction_losses(series.all_windows(self.w))

    def anomaly_scores(self, series: TimeSeries, w: Optional[int] = None) -> np.ndarray:
        """
        Per-point scores: mean loss over all stride-1 windows covering each point.

        Args:
            series: Series to score (N >= w)
            w: Window length; must match the detector's

        Returns:
            Scores of length N
        """
        w = self.w if w is None else w
        if w != self.w:
            raise DimensionError("window length", self.w, w)
        if series.n_points < w:
            raise WindowBoundsError(f"series '{series.name}' has {series.n_points} points, shorter than w={w}")

        window_loss = self.window_losses(series)
        kernel = np.ones(w)
        totals = np.convolve(window_loss, kernel)
        counts = np.convolve(np.ones_like(window_loss), kernel)
        return totals / counts

    def train_epoch(
        self,
        S: SampleSet,
        opt: OptimizerState,
        batch_size: int,
        rng: np.random.Generator,
    ) -> Dict[int, float]:
        """
        One shuffled mini-batch pass over ``S``.

        Returns:
            Loss of every sample id, recorded on its batch before the update
        """
        if len(S) == 0:
            raise ValueError("cannot train on an empty sample set")
        if batch_size < 1:
            raise ValueError(f"batch size must be positive, got {batch_size}")

        samples = list(S)
        for s in samples:
            self._check_sample(s)
        data = as_tensor(np.stack([s.flat() for s in samples]))
        order = rng.permutation(len(samples))

        loss_map: Dict[int, float] = {}
        for begin in range(0, len(samples), batch_size):
            idx = order[begin:begin + batch_size]
            x = data[torch.as_tensor(idx)]
            per_sample = ((self.net.apply(x) - x) ** 2).mean(dim=1)
            (gradient,) = torch.autograd.grad(per_sample.mean(), self.net.params)
            for i, value in zip(idx, per_sample.detach().numpy()):
                loss_map[samples[i].id] = float(value)
            optimizer_step(opt, self.net, gradient)

        return loss_map

    def save(self, path, extra: Optional[dict] = None):
        write_checkpoint(path, "detector", self.net, {"config": asdict(self.config), **(extra or {})})

    @classmethod
    def load(cls, path) -> 'Detector':
        meta, net = read_checkpoint(path, "detector")
        return cls(DetectorConfig(**meta["config"]), net)
