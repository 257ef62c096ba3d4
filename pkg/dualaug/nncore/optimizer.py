"""
First-order optimizers over flat parameter vectors.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
import logging

import numpy as np
import torch

from .network import DimensionError, Network, as_tensor

logger = logging.getLogger(__name__)


class NonFiniteGradientError(RuntimeError):
    """Raised when a gradient holds NaN or infinite entries."""


class OptimizerKind(str, Enum):
    ADAM = "adam"
    SGD = "sgd"


@dataclass
class OptimizerState:
    """
    Optimizer bound to one network's parameter vector.

    ``adam`` is the adaptive-moment default; ``sgd`` is plain descent
    (theta <- theta - lr * grad) used by analytic tests.
    """

    lr: float = 1e-3
    kind: OptimizerKind = OptimizerKind.ADAM
    step_count: int = 0
    _optimizer: Optional[torch.optim.Optimizer] = field(default=None, repr=False)
    _bound: Optional[torch.nn.Parameter] = field(default=None, repr=False)

    def __post_init__(self):
        self.kind = OptimizerKind(self.kind)
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")

    def bind(self, net: Network):
        if self._bound is net.params:
            return
        if self._bound is not None:
            raise ValueError("optimizer state is already bound to another network")
        if self.kind is OptimizerKind.ADAM:
            self._optimizer = torch.optim.Adam([net.params], lr=self.lr)
        else:
            self._optimizer = torch.optim.SGD([net.params], lr=self.lr)
        self._bound = net.params

    def _moment(self, key: str) -> Optional[np.ndarray]:
        if self.kind is not OptimizerKind.ADAM or self._bound is None:
            return None
        state = self._optimizer.state.get(self._bound, {})
        if key not in state:
            return np.zeros(self._bound.numel())
        return state[key].detach().numpy().copy()

    @property
    def first_moment(self) -> Optional[np.ndarray]:
        return self._moment("exp_avg")

    @property
    def second_moment(self) -> Optional[np.ndarray]:
        return self._moment("exp_avg_sq")


def optimizer_step(opt: OptimizerState, net: Network, gradient) -> Network:
    """
    Apply one update to ``net`` in place.

    Args:
        opt: Optimizer state (bound to ``net`` on first use)
        net: Network to update
        gradient: Flat gradient of length P (numpy array or tensor)

    Returns:
        The updated network
    """
    g = as_tensor(gradient).reshape(-1)
    if g.numel() != net.n_params:
        raise DimensionError("gradient", net.n_params, g.numel())
    if not torch.isfinite(g).all():
        bad = int((~torch.isfinite(g)).sum())
        raise NonFiniteGradientError(f"refusing update: {bad} non-finite gradient entries")

    opt.bind(net)
    net.params.grad = g.clone()
    opt._optimizer.step()
    net.params.grad = None
    opt.step_count += 1
    return net
