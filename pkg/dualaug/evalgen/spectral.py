"""
SPECTRAL ANALYSIS
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Window spectra, and per-frequency gradient contributions of a
one-hidden-layer tanh network fitted to a band-limited signal.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union
import logging

import numpy as np
import scipy.fft
import torch
from scipy.stats import spearmanr

from ..nncore import Activation, Network, OptimizerState, as_tensor, optimizer_step
from ..windows import WindowSample

logger = logging.getLogger(__name__)

# bins below this fraction of the peak magnitude are numerically inactive
ACTIVE_FLOOR = 1e-8


def spectrum(sample: Union[WindowSample, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Amplitude per nonnegative DFT bin of the dimension-averaged window.

    Amplitudes are scaled so that their squares sum to the signal energy.

    Returns:
        (bin indices, amplitudes)
    """
    values = sample.contents() if isinstance(sample, WindowSample) else np.asarray(sample, dtype=np.float64)
    signal = values.mean(axis=1) if values.ndim == 2 else values.reshape(-1)
    m = signal.size
    if m < 2:
        raise ValueError(f"spectrum needs at least 2 points, got {m}")

    coeffs = scipy.fft.rfft(signal)
    weights = np.full(coeffs.size, 2.0)
    weights[0] = 1.0
    if m % 2 == 0:
        weights[-1] = 1.0
    amplitudes = np.abs(coeffs) * np.sqrt(weights / m)
    return np.arange(coeffs.size), amplitudes


def high_band_energy(values: np.ndarray, cutoff_bin: int) -> float:
    """Mean squared amplitude above ``cutoff_bin``."""
    _, amplitudes = spectrum(values)
    tail = amplitudes[cutoff_bin + 1:]
    return float(np.mean(tail ** 2)) if tail.size else 0.0


@dataclass
class DecayResult:
    frequencies: np.ndarray
    magnitudes: np.ndarray
    active: np.ndarray
    spearman: float

    def to_rows(self):
        return [
            {"f": int(f), "magnitude": float(m), "active": bool(a)}
            for f, m, a in zip(self.frequencies, self.magnitudes, self.active)
        ]


def decay_grid(m: int) -> np.ndarray:
    return np.linspace(-np.pi, np.pi, m, endpoint=False)


def band_limited_signal(
    grid: np.ndarray,
    frequencies: Sequence[int] = (1, 3, 5),
    amplitudes: Sequence[float] = (1.0, 0.5, 0.25),
) -> np.ndarray:
    return sum(a * np.sin(f * grid) for f, a in zip(frequencies, amplitudes))


def _check_single_hidden(net: Network):
    if (
        len(net.layer_sizes) != 3
        or net.n_inputs != 1
        or net.n_outputs != 1
        or net.activations[0] is not Activation.TANH
    ):
        raise ValueError(
            f"expected a 1 -> N tanh -> 1 network, got sizes {net.layer_sizes} "
            f"with activations {[a.value for a in net.activations]}"
        )


def _designated(net: Network, params: Union[str, Sequence[int]]) -> np.ndarray:
    (w1, b1), (w2, b2) = net.layer_slices()
    if isinstance(params, str):
        groups = {
            "hidden": np.r_[w1, b1],
            "input_weights": np.r_[w1],
            "output": np.r_[w2, b2],
            "all": np.arange(net.n_params),
        }
        if params not in groups:
            raise ValueError(f"unknown parameter group '{params}', expected one of {sorted(groups)}")
        return groups[params]
    return np.asarray(params, dtype=np.int64)


def frequency_gradient_decay(
    net: Network,
    signal,
    grid: Optional[np.ndarray] = None,
    params: Union[str, Sequence[int]] = "hidden",
) -> DecayResult:
    """
    Gradient magnitude of each frequency's loss component.

    The residual between network output and ``signal`` over ``grid`` is
    transformed by a real DFT; bin f contributes |R_f|^2 to the loss. The
    magnitude at f is the norm of d|R_f|^2/d theta over the designated
    parameters.

    Args:
        net: One-hidden-layer tanh network with scalar input and output
        signal: Target values on the grid
        grid: Input points (defaults to M points over [-pi, pi))
        params: "hidden" (default), "input_weights", "output", "all", or explicit indices

    Returns:
        DecayResult with per-bin magnitudes and the Spearman correlation
        between frequency and log magnitude over active bins (f >= 1)
    """
    _check_single_hidden(net)
    target = as_tensor(signal).reshape(-1)
    grid = decay_grid(target.numel()) if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size != target.numel():
        raise ValueError(f"grid has {grid.size} points, signal has {target.numel()}")
    x = as_tensor(grid).reshape(-1, 1)
    m = target.numel()

    def bin_losses(theta: torch.Tensor) -> torch.Tensor:
        residual = net.apply(x, theta)[:, 0] - target
        coeffs = torch.fft.rfft(residual) / m
        return coeffs.real ** 2 + coeffs.imag ** 2

    jacobian = torch.autograd.functional.jacobian(bin_losses, net.params.detach()).numpy()
    index = _designated(net, params)
    magnitudes = np.linalg.norm(jacobian[:, index], axis=1)
    frequencies = np.arange(magnitudes.size)

    peak = magnitudes[1:].max() if magnitudes.size > 1 else 0.0
    active = (frequencies >= 1) & (magnitudes >= ACTIVE_FLOOR * peak) & (magnitudes > 0)
    if active.sum() >= 3:
        rho = float(spearmanr(frequencies[active], np.log(magnitudes[active])).correlation)
    else:
        rho = float("nan")
    return DecayResult(frequencies, magnitudes, active, rho)


def train_decay_net(
    signal,
    grid: np.ndarray,
    rng: np.random.Generator,
    hidden: int = 32,
    epochs: int = 200,
    lr: float = 1e-2,
) -> Network:
    """Fit a 1 -> hidden tanh -> 1 network to ``signal`` by full-batch Adam."""
    net = Network.build([1, hidden, 1], [Activation.TANH, Activation.IDENTITY], rng)
    opt = OptimizerState(lr=lr)
    x = as_tensor(grid).reshape(-1, 1)
    y = as_tensor(signal).reshape(-1, 1)
    for _ in range(epochs):
        loss = ((net.apply(x) - y) ** 2).mean()
        (gradient,) = torch.autograd.grad(loss, net.params)
        optimizer_step(opt, net, gradient)
    return net


def decay_experiment(seed: int = 0, m: int = 256, hidden: int = 32, epochs: int = 200) -> DecayResult:
    """Train on a three-sinusoid signal and measure the per-frequency decay."""
    grid = decay_grid(m)
    signal = band_limited_signal(grid)
    net = train_decay_net(signal, grid, np.random.default_rng(seed), hidden=hidden, epochs=epochs)
    result = frequency_gradient_decay(net, signal, grid)
    logger.info(f"Frequency decay: Spearman rho = {result.spearman:.3f} over {int(result.active.sum())} bins")
    return result
