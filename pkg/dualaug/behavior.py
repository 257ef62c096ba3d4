"""
PARAMETER & LOSS BEHAVIOR
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Per-sample parameter behavior |H^-1 grad L| (how the optimal parameters
respond to up-weighting one sample), key-parameter selection, the
behavior center, and the dual parameter/loss reward.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence
import logging

import numpy as np
import pandas as pd
import torch
from scipy.sparse.linalg import LinearOperator, cg

from .detector import Detector
from .nncore import Network, as_tensor, hvp, per_sample_grads
from .windows import Action, SampleSet, WindowSample

logger = logging.getLogger(__name__)


class HessianMode(str, Enum):
    IDENTITY = "identity"
    DIAGONAL = "diagonal"
    CG = "cg"


@dataclass
class HessianSettings:
    """
    How H^-1 is applied.

    identity: H = I; diagonal: mean squared per-sample gradients (Fisher
    style) plus damping; cg: conjugate gradients on (H + damping*I) x = g
    with exact Hessian-vector products.
    """

    mode: HessianMode = HessianMode.DIAGONAL
    damping: float = 1e-3
    max_iter: int = 200
    tol: float = 1e-10
    subsample: int = 512

    def __post_init__(self):
        self.mode = HessianMode(self.mode)
        if self.mode is not HessianMode.IDENTITY and not self.damping > 0:
            raise ValueError(f"damping must be positive, got {self.damping}")
        if self.max_iter < 1 or self.subsample < 1:
            raise ValueError("max_iter and subsample must be positive")


class ConvergenceError(RuntimeError):
    """Conjugate gradients did not reach the tolerance."""

    def __init__(self, residual_norm: float, iterations: int):
        super().__init__(
            f"conjugate gradients did not converge in {iterations} iterations "
            f"(residual norm {residual_norm:.3e})"
        )
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass
class KeyParams:
    """Sorted, unique parameter indices that behavior vectors are restricted to."""

    indices: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.ndim != 1 or self.indices.size == 0:
            raise ValueError("key parameters need at least one index")
        if np.any(np.diff(self.indices) <= 0) or self.indices[0] < 0:
            raise ValueError("key parameter indices must be sorted, unique and nonnegative")

    @property
    def k(self) -> int:
        return int(self.indices.size)

    @classmethod
    def all(cls, n_params: int) -> 'KeyParams':
        return cls(np.arange(n_params))


@dataclass
class BehaviorRecord:
    """Loss and parameter behavior of one sample, raw and normalized."""

    sample_id: int
    start: int
    r_l_raw: float
    p_vec: np.ndarray = field(repr=False)
    r_p_raw: float
    r_l: float
    r_p: float
    kind: Optional[str] = None

    def to_row(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "start": self.start,
            "r_l_raw": self.r_l_raw,
            "r_p_raw": self.r_p_raw,
            "r_l": self.r_l,
            "r_p": self.r_p,
            "class": self.kind,
        }


def solve_damped(
    hvp_fn: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    damping: float,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> np.ndarray:
    """
    Solve (H + damping*I) x = rhs by conjugate gradients.

    Args:
        hvp_fn: Returns H @ v for a vector v
        rhs: Right-hand side
        damping: Added to the diagonal
        max_iter: Iteration cap
        tol: Relative residual tolerance

    Returns:
        Solution vector

    Raises:
        ConvergenceError: Tolerance not met within ``max_iter``
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.size
    if not np.any(rhs):
        return np.zeros(n)

    operator = LinearOperator((n, n), matvec=lambda v: hvp_fn(np.asarray(v).reshape(-1)) + damping * v.reshape(-1),
                              dtype=np.float64)
    counter = {"iterations": 0}

    def count(_):
        counter["iterations"] += 1

    x, info = cg(operator, rhs, rtol=tol, atol=0.0, maxiter=max_iter, callback=count)
    if info != 0:
        residual = float(np.linalg.norm(rhs - operator.matvec(x)))
        raise ConvergenceError(residual, counter["iterations"])
    return x


def _as_batch(inputs, targets=None):
    inputs = as_tensor(inputs)
    if inputs.dim() == 1:
        inputs = inputs.unsqueeze(0)
    targets = inputs if targets is None else as_tensor(targets).reshape(inputs.shape[0], -1)
    return inputs, targets


class InverseHessian:
    """
    H^-1 (damped) at a fixed network and reference batch.

    The curvature (diagonal estimate, or the batch for exact products) is
    captured once, so later samples are scored against the same H.
    """

    def __init__(
        self,
        net: Network,
        batch_inputs,
        batch_targets=None,
        settings: Optional[HessianSettings] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        self.net = net
        self.settings = settings or HessianSettings()
        inputs, targets = _as_batch(batch_inputs, batch_targets)
        if inputs.shape[0] == 0:
            raise ValueError("the Hessian batch must be nonempty")

        if inputs.shape[0] > self.settings.subsample and self.settings.mode is not HessianMode.IDENTITY:
            rng = rng if rng is not None else np.random.default_rng(0)
            keep = np.sort(rng.choice(inputs.shape[0], size=self.settings.subsample, replace=False))
            inputs, targets = inputs[torch.as_tensor(keep)], targets[torch.as_tensor(keep)]
        self.inputs, self.targets = inputs, targets

        self.diagonal = None
        if self.settings.mode is HessianMode.DIAGONAL:
            grads = per_sample_grads(net, inputs, targets)
            self.diagonal = (grads ** 2).mean(dim=0).numpy()

    def hvp(self, v: np.ndarray) -> np.ndarray:
        return hvp(self.net, (self.inputs, self.targets), v)

    def apply(self, gradients: np.ndarray) -> np.ndarray:
        """Rows of H^-1 g for each gradient row g."""
        gradients = np.atleast_2d(np.asarray(gradients, dtype=np.float64))
        mode = self.settings.mode
        if mode is HessianMode.IDENTITY:
            return gradients.copy()
        if mode is HessianMode.DIAGONAL:
            return gradients / (self.diagonal + self.settings.damping)
        return np.stack([
            solve_damped(self.hvp, g, self.settings.damping, self.settings.max_iter, self.settings.tol)
            for g in gradients
        ])


def parameter_sensitivity(
    net: Network,
    inputs,
    targets,
    inverse: InverseHessian,
) -> np.ndarray:
    """Signed parameter response -H^-1 grad L for each sample row, shape (n, P)."""
    x, t = _as_batch(inputs, targets)
    grads = per_sample_grads(net, x, t).numpy()
    return -inverse.apply(grads)


def parameter_behavior(
    det: Detector,
    s: WindowSample,
    batch: Sequence[WindowSample],
    mode: Optional[HessianSettings] = None,
    keys: Optional[KeyParams] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    |H^-1 grad L(s)| restricted to ``keys`` (all parameters when None).

    Args:
        det: Trained detector
        s: Sample to score
        batch: Samples defining H (mean loss over the batch)
        mode: Hessian settings
        keys: Key parameters
        rng: Generator for subsampling large batches
    """
    batch = list(batch)
    if not batch:
        raise ValueError("parameter behavior needs a nonempty batch")
    inverse = InverseHessian(det.net, np.stack([b.flat() for b in batch]), settings=mode, rng=rng)
    return parameter_behaviors(det, [s], inverse, keys)[0]


def parameter_behaviors(
    det: Detector,
    samples: Sequence[WindowSample],
    inverse: InverseHessian,
    keys: Optional[KeyParams] = None,
) -> np.ndarray:
    """Vectorized behavior of many samples, shape (n, k)."""
    windows = np.stack([s.flat() for s in samples])
    behavior = np.abs(parameter_sensitivity(det.net, windows, None, inverse))
    return behavior if keys is None else behavior[:, keys.indices]


def select_key_parameters(first_epoch_behaviors: np.ndarray, k: int) -> KeyParams:
    """The k indices with largest mean absolute behavior; ties go to the lower index."""
    behaviors = np.atleast_2d(np.asarray(first_epoch_behaviors, dtype=np.float64))
    if behaviors.shape[0] == 0:
        raise ValueError("key parameter selection needs at least one behavior vector")
    n_params = behaviors.shape[1]
    if k < 1 or k > n_params:
        raise ValueError(f"k must be in [1, {n_params}], got {k}")
    means = np.abs(behaviors).mean(axis=0)
    order = np.argsort(-means, kind="stable")
    return KeyParams(np.sort(order[:k]))


def behavior_center(records: Sequence[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of the behavior vectors."""
    if len(records) == 0:
        raise ValueError("behavior center of an empty set")
    return np.mean(np.stack([np.asarray(r, dtype=np.float64) for r in records]), axis=0)


class RewardNormalizer:
    """Min-max scaling fitted on one epoch's population, clipped to [0, 1] afterwards."""

    def __init__(self, values: Sequence[float]):
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise ValueError("cannot fit a normalizer on no values")
        self.low = float(values.min())
        self.high = float(values.max())

    def __call__(self, values):
        values = np.asarray(values, dtype=np.float64)
        if self.high == self.low:
            return np.full_like(values, 0.5)
        return np.clip((values - self.low) / (self.high - self.low), 0.0, 1.0)


def normalize_rewards(values: Sequence[float]) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant input maps to 0.5."""
    return RewardNormalizer(values)(values)


def dual_reward(r_l: float, r_p: float, action: Action, alpha: float) -> float:
    """
    Reward for taking ``action`` on a sample with normalized loss ``r_l``
    and parameter distance ``r_p``.

    expand:   alpha*r_l + (1-alpha)*(1-r_p)
    preserve: alpha*(1-r_l) + (1-alpha)*(1-r_p)
    delete:   alpha*r_l + (1-alpha)*r_p
    """
    for name, value in (("r_l", r_l), ("r_p", r_p), ("alpha", alpha)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")

    action = Action(action)
    if action is Action.EXPAND:
        reward = alpha * r_l + (1 - alpha) * (1 - r_p)
    elif action is Action.PRESERVE:
        reward = alpha * (1 - r_l) + (1 - alpha) * (1 - r_p)
    else:
        reward = alpha * r_l + (1 - alpha) * r_p
    return float(min(1.0, max(0.0, reward)))


class BehaviorInvestigator:
    """
    Behavior of the current training set for one augmentation call.

    Computes key parameters, the behavior center and both normalizers over
    the population of ``S`` at construction. Samples added later are scored
    lazily against the same keys, center and normalizers.
    """

    def __init__(
        self,
        det: Detector,
        S: SampleSet,
        settings: HessianSettings,
        k: int,
        rng: np.random.Generator,
        classify: Optional[Callable[[WindowSample], Optional[str]]] = None,
    ):
        self.det = det
        self.classify = classify
        samples = list(S)
        windows = np.stack([s.flat() for s in samples])

        self.inverse = InverseHessian(det.net, windows, settings=settings, rng=rng)
        full = np.abs(parameter_sensitivity(det.net, windows, None, self.inverse))
        self.keys = select_key_parameters(full, min(k, det.net.n_params))

        p_vecs = full[:, self.keys.indices]
        self.center = behavior_center(p_vecs)
        losses = det.reconstruction_losses(windows)
        distances = np.linalg.norm(p_vecs - self.center, axis=1)
        self.loss_scale = RewardNormalizer(losses)
        self.distance_scale = RewardNormalizer(distances)

        self._records: Dict[int, BehaviorRecord] = {}
        for s, loss, p_vec, distance in zip(samples, losses, p_vecs, distances):
            self._records[s.id] = self._make_record(s, float(loss), p_vec, float(distance))

        logger.debug(
            f"Investigated {len(samples)} samples: k={self.keys.k}, "
            f"loss range [{self.loss_scale.low:.4g}, {self.loss_scale.high:.4g}]"
        )

    def _make_record(self, s: WindowSample, loss: float, p_vec: np.ndarray, distance: float) -> BehaviorRecord:
        return BehaviorRecord(
            sample_id=s.id,
            start=s.start,
            r_l_raw=loss,
            p_vec=p_vec,
            r_p_raw=distance,
            r_l=float(self.loss_scale(loss)),
            r_p=float(self.distance_scale(distance)),
            kind=self.classify(s) if self.classify else None,
        )

    def record(self, s: WindowSample) -> BehaviorRecord:
        if s.id not in self._records:
            p_vec = parameter_behaviors(self.det, [s], self.inverse, self.keys)[0]
            distance = float(np.linalg.norm(p_vec - self.center))
            self._records[s.id] = self._make_record(s, self.det.sample_loss(s), p_vec, distance)
        return self._records[s.id]

    def records(self) -> List[BehaviorRecord]:
        return sorted(self._records.values(), key=lambda r: r.sample_id)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_row() for r in self.records()])

    def write_csv(self, path):
        self.to_frame().to_csv(Path(path), index=False)
