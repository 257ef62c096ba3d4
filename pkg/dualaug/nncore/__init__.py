"""
Differentiable substrate shared by the detector and the agent's value networks.
"""

from .network import (
    DTYPE,
    Activation,
    DimensionError,
    LossKind,
    Network,
    as_tensor,
    batch_loss_fn,
    forward,
    functional_hvp,
    hvp,
    loss_and_grad,
    mse_loss,
    parameter_count,
    per_sample_grads,
)
from .optimizer import NonFiniteGradientError, OptimizerKind, OptimizerState, optimizer_step

__all__ = [
    'DTYPE',
    'Activation',
    'DimensionError',
    'LossKind',
    'Network',
    'NonFiniteGradientError',
    'OptimizerKind',
    'OptimizerState',
    'as_tensor',
    'batch_loss_fn',
    'forward',
    'functional_hvp',
    'hvp',
    'loss_and_grad',
    'mse_loss',
    'optimizer_step',
    'parameter_count',
    'per_sample_grads',
]
