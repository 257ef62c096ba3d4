"""
NETWORK CORE
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Flat-parameter feed-forward networks with per-sample gradients and
Hessian-vector products.

Parameter layout (fixed, key-parameter indices depend on it):
for each layer in order, the weight matrix W (out x in, row-major)
followed by the bias vector b (out).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Sequence, Tuple, Union
import logging

import numpy as np
import torch
from torch.func import grad, vmap

logger = logging.getLogger(__name__)

DTYPE = torch.float64

ArrayLike = Union[np.ndarray, torch.Tensor, Sequence[float]]


class DimensionError(ValueError):
    """Raised when an input does not match the network's expected size."""

    def __init__(self, what: str, expected: int, given: int):
        super().__init__(f"{what}: expected length {expected}, got {given}")
        self.expected = expected
        self.given = given


class Activation(str, Enum):
    TANH = "tanh"
    RELU = "relu"
    IDENTITY = "identity"


class LossKind(str, Enum):
    MSE = "mse"


_ACTIVATIONS = {
    Activation.TANH: torch.tanh,
    Activation.RELU: torch.relu,
    Activation.IDENTITY: lambda z: z,
}


def as_tensor(values: ArrayLike) -> torch.Tensor:
    """Convert array-like input to a float64 tensor."""
    if isinstance(values, torch.Tensor):
        return values.detach().to(DTYPE)
    return torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE)


def parameter_count(layer_sizes: Sequence[int]) -> int:
    """Sum over layers of (in*out + out)."""
    return sum(n_in * n_out + n_out for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]))


@dataclass
class Network:
    """
    Feed-forward network holding all weights in one flat vector.

    Args:
        layer_sizes: Units per layer, input first
        activations: One activation per non-input layer
        params: Flat parameter vector (see module docstring for layout)
    """

    layer_sizes: List[int]
    activations: List[Activation]
    params: torch.nn.Parameter = field(repr=False)

    def __post_init__(self):
        self.layer_sizes = [int(n) for n in self.layer_sizes]
        self.activations = [Activation(a) for a in self.activations]

        if len(self.layer_sizes) < 2 or any(n < 1 for n in self.layer_sizes):
            raise ValueError(f"layer sizes must be >= 2 positive integers, got {self.layer_sizes}")
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise DimensionError("activations", len(self.layer_sizes) - 1, len(self.activations))

        values = as_tensor(self.params).reshape(-1)
        if values.numel() != self.n_params:
            raise DimensionError("parameters", self.n_params, values.numel())
        self.params = torch.nn.Parameter(values.clone())

    @classmethod
    def build(
        cls,
        layer_sizes: Sequence[int],
        activations: Sequence[Activation],
        rng: np.random.Generator,
    ) -> 'Network':
        """Initialize weights uniformly in +-1/sqrt(fan_in), biases likewise."""
        chunks = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            chunks.append(rng.uniform(-bound, bound, size=n_in * n_out + n_out))
        return cls(list(layer_sizes), list(activations), np.concatenate(chunks))

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int], activations: Sequence[Activation]) -> 'Network':
        return cls(list(layer_sizes), list(activations), np.zeros(parameter_count(layer_sizes)))

    @property
    def n_params(self) -> int:
        return parameter_count(self.layer_sizes)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def layer_slices(self) -> List[Tuple[slice, slice]]:
        """(weight slice, bias slice) into the flat vector for every layer."""
        slices = []
        offset = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = slice(offset, offset + n_in * n_out)
            offset += n_in * n_out
            b = slice(offset, offset + n_out)
            offset += n_out
            slices.append((w, b))
        return slices

    def apply(self, x: torch.Tensor, params: torch.Tensor = None) -> torch.Tensor:
        """
        Batched forward pass, differentiable in ``params``.

        Args:
            x: Inputs of shape (batch, n_inputs)
            params: Flat parameters (defaults to the network's own)

        Returns:
            Outputs of shape (batch, n_outputs)
        """
        theta = self.params if params is None else params
        h = x
        for (n_in, n_out), (w, b), act in zip(
            zip(self.layer_sizes[:-1], self.layer_sizes[1:]), self.layer_slices(), self.activations
        ):
            weight = theta[w].reshape(n_out, n_in)
            h = _ACTIVATIONS[act](h @ weight.T + theta[b])
        return h

    def flat_params(self) -> np.ndarray:
        return self.params.detach().numpy().copy()

    def set_params(self, values: ArrayLike):
        values = as_tensor(values).reshape(-1)
        if values.numel() != self.n_params:
            raise DimensionError("parameters", self.n_params, values.numel())
        with torch.no_grad():
            self.params.copy_(values)

    def clone(self) -> 'Network':
        return Network(list(self.layer_sizes), list(self.activations), self.params.detach().clone())

    def check_inputs(self, x: torch.Tensor) -> torch.Tensor:
        """Promote to 2-D and check the feature size."""
        if x.dim() == 1:
            x = x.unsqueeze(0)
        if x.shape[-1] != self.n_inputs:
            raise DimensionError("input", self.n_inputs, x.shape[-1])
        return x


def forward(net: Network, x: ArrayLike) -> np.ndarray:
    """Evaluate the network on a single input vector."""
    inputs = as_tensor(x).reshape(-1)
    if inputs.numel() != net.n_inputs:
        raise DimensionError("input", net.n_inputs, inputs.numel())
    with torch.no_grad():
        return net.apply(inputs.unsqueeze(0))[0].numpy().copy()


def mse_loss(net: Network, params: torch.Tensor, x: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error of one sample, as a function of the parameters."""
    out = net.apply(x.unsqueeze(0), params)[0]
    return ((out - target) ** 2).mean()


def _check_pair(net: Network, x: torch.Tensor, target: torch.Tensor):
    if x.shape[-1] != net.n_inputs:
        raise DimensionError("input", net.n_inputs, x.shape[-1])
    if target.shape[-1] != net.n_outputs:
        raise DimensionError("target", net.n_outputs, target.shape[-1])


def loss_and_grad(
    net: Network,
    sample_input: ArrayLike,
    target: ArrayLike,
    loss_kind: LossKind = LossKind.MSE,
) -> Tuple[float, np.ndarray]:
    """
    Loss of one sample and its gradient with respect to the flat parameters.

    Returns:
        (loss, gradient of length P)
    """
    if LossKind(loss_kind) is not LossKind.MSE:
        raise ValueError(f"unsupported loss kind: {loss_kind}")

    x = as_tensor(sample_input).reshape(-1)
    t = as_tensor(target).reshape(-1)
    _check_pair(net, x, t)

    theta = net.params.detach()
    loss = mse_loss(net, theta, x, t)
    g = grad(lambda p: mse_loss(net, p, x, t))(theta)
    return float(loss), g.numpy().copy()


def per_sample_grads(net: Network, inputs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Gradients of every sample's loss, shape (n, P)."""
    inputs = net.check_inputs(as_tensor(inputs))
    targets = as_tensor(targets).reshape(inputs.shape[0], -1)
    _check_pair(net, inputs, targets)

    theta = net.params.detach()
    sample_grad = grad(lambda p, x, t: mse_loss(net, p, x, t))
    return vmap(sample_grad, in_dims=(None, 0, 0))(theta, inputs, targets)


def functional_hvp(loss_fn: Callable[[torch.Tensor], torch.Tensor], params: ArrayLike, v: ArrayLike) -> np.ndarray:
    """H*v of an arbitrary scalar loss at ``params`` by double differentiation."""
    theta = as_tensor(params).reshape(-1)
    vec = as_tensor(v).reshape(-1)
    if vec.numel() != theta.numel():
        raise DimensionError("vector", theta.numel(), vec.numel())
    _, product = torch.autograd.functional.hvp(loss_fn, theta, vec)
    return product.detach().numpy().copy()


def _batch_tensors(net: Network, batch) -> Tuple[torch.Tensor, torch.Tensor]:
    if isinstance(batch, tuple):
        inputs, targets = batch
    else:
        if len(batch) == 0:
            raise ValueError("hvp needs a nonempty batch")
        inputs = np.stack([np.asarray(x, dtype=np.float64).reshape(-1) for x, _ in batch])
        targets = np.stack([np.asarray(t, dtype=np.float64).reshape(-1) for _, t in batch])
    inputs = as_tensor(inputs)
    targets = as_tensor(targets)
    if inputs.shape[0] == 0:
        raise ValueError("hvp needs a nonempty batch")
    _check_pair(net, inputs, targets)
    return inputs, targets


def batch_loss_fn(net: Network, inputs: torch.Tensor, targets: torch.Tensor) -> Callable[[torch.Tensor], torch.Tensor]:
    """Mean per-sample MSE over a batch, as a function of the parameters."""
    def loss(p: torch.Tensor) -> torch.Tensor:
        out = net.apply(inputs, p)
        return ((out - targets) ** 2).mean(dim=1).mean()
    return loss


def hvp(net: Network, batch, v: ArrayLike, method: str = "autograd", step: float = 1e-5) -> np.ndarray:
    """
    Hessian-vector product of the mean batch loss, without forming H.

    Args:
        net: Network at which the Hessian is taken
        batch: List of (input, target) pairs, or a tuple of stacked arrays
        v: Vector of length P
        method: "autograd" (double differentiation) or "fd"
            (central difference of gradients)
        step: Finite-difference step for the "fd" method

    Returns:
        H @ v as a vector of length P
    """
    inputs, targets = _batch_tensors(net, batch)
    vec = as_tensor(v).reshape(-1)
    if vec.numel() != net.n_params:
        raise DimensionError("vector", net.n_params, vec.numel())

    loss = batch_loss_fn(net, inputs, targets)
    theta = net.params.detach()

    if method == "autograd":
        return functional_hvp(loss, theta, vec)
    if method == "fd":
        norm = float(torch.linalg.vector_norm(vec))
        if norm == 0.0:
            return np.zeros(net.n_params)
        h = step / norm
        g_plus = grad(loss)(theta + h * vec)
        g_minus = grad(loss)(theta - h * vec)
        return ((g_plus - g_minus) / (2 * h)).numpy().copy()
    raise ValueError(f"unknown hvp method: {method}")
