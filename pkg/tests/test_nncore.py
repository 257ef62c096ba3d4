"""
Tests for the differentiable core
=================================

Flat-parameter networks, gradients, Hessian-vector products and optimizers.
"""

import numpy as np
import pytest
import torch
from numpy.testing import assert_allclose

from dualaug.nncore import (
    Activation,
    DimensionError,
    Network,
    NonFiniteGradientError,
    OptimizerKind,
    OptimizerState,
    as_tensor,
    batch_loss_fn,
    forward,
    hvp,
    loss_and_grad,
    optimizer_step,
    parameter_count,
    per_sample_grads,
)


def _tanh_net(rng, sizes=(3, 4, 2)):
    return Network.build(list(sizes), [Activation.TANH, Activation.IDENTITY], rng)


class TestNetwork:
    """Construction, layout and forward pass."""

    def test_parameter_count(self):
        assert parameter_count([3, 4, 2]) == 3 * 4 + 4 + 4 * 2 + 2

    def test_zero_network_outputs_zero(self):
        net = Network.zeros([5, 3, 2], [Activation.TANH, Activation.IDENTITY])
        assert_allclose(forward(net, np.ones(5)), np.zeros(2))

    def test_layer_slices_cover_vector(self, rng):
        net = _tanh_net(rng)
        covered = []
        for w, b in net.layer_slices():
            covered.extend(range(w.start, w.stop))
            covered.extend(range(b.start, b.stop))
        assert covered == list(range(net.n_params))

    def test_weight_layout_row_major(self):
        # W is out x in, row-major, then bias
        net = Network([2, 2], [Activation.IDENTITY], np.array([1.0, 2.0, 3.0, 4.0, 0.5, -0.5]))
        assert_allclose(forward(net, [1.0, 1.0]), [3.5, 6.5])

    def test_forward_dimension_mismatch(self, rng):
        net = _tanh_net(rng)
        with pytest.raises(DimensionError):
            forward(net, np.ones(4))

    def test_wrong_parameter_length(self):
        with pytest.raises(DimensionError):
            Network([2, 2], [Activation.IDENTITY], np.zeros(5))

    def test_set_params_and_clone_are_independent(self, rng):
        net = _tanh_net(rng)
        copy = net.clone()
        net.set_params(np.zeros(net.n_params))
        assert np.any(copy.flat_params() != 0)
        assert_allclose(net.flat_params(), 0.0)


class TestGradients:
    """Analytic gradients and Hessian-vector products."""

    def test_gradient_matches_finite_differences(self, rng):
        net = _tanh_net(rng)
        x, t = rng.normal(size=3), rng.normal(size=2)
        loss, g = loss_and_grad(net, x, t)
        theta = net.flat_params()
        step = 1e-6
        numeric = np.empty_like(theta)
        for j in range(theta.size):
            e = np.zeros_like(theta)
            e[j] = step
            net.set_params(theta + e)
            up, _ = loss_and_grad(net, x, t)
            net.set_params(theta - e)
            down, _ = loss_and_grad(net, x, t)
            numeric[j] = (up - down) / (2 * step)
        net.set_params(theta)
        assert loss >= 0
        assert np.linalg.norm(g - numeric) / np.linalg.norm(g) < 1e-4

    def test_per_sample_grads_match_single(self, rng):
        net = _tanh_net(rng)
        x, t = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
        batch = per_sample_grads(net, as_tensor(x), as_tensor(t)).numpy()
        for i in range(5):
            _, g = loss_and_grad(net, x[i], t[i])
            assert_allclose(batch[i], g, rtol=1e-10, atol=1e-12)

    def test_hvp_matches_dense_hessian(self, rng):
        net = _tanh_net(rng)
        x, t = rng.normal(size=(8, 3)), rng.normal(size=(8, 2))
        dense = torch.autograd.functional.hessian(
            batch_loss_fn(net, as_tensor(x), as_tensor(t)), net.params.detach()
        ).numpy()
        v = rng.normal(size=net.n_params)
        assert_allclose(hvp(net, (x, t), v), dense @ v, rtol=1e-8, atol=1e-10)

    def test_fd_hvp_close_to_autograd(self, rng):
        net = _tanh_net(rng)
        batch = [(rng.normal(size=3), rng.normal(size=2)) for _ in range(6)]
        v = rng.normal(size=net.n_params)
        exact = hvp(net, batch, v)
        approx = hvp(net, batch, v, method="fd")
        assert np.linalg.norm(approx - exact) / np.linalg.norm(exact) < 1e-5

    def test_linear_model_hessian_is_constant(self):
        # mean squared error of a linear map has H = 2 X^T X / n in the weights
        net = Network([2, 1], [Activation.IDENTITY], np.array([0.3, -0.7, 0.1]))
        x = np.array([[1.0, 0.0], [0.0, 2.0]])
        t = np.array([[0.0], [1.0]])
        xa = np.hstack([x, np.ones((2, 1))])
        expected = 2.0 * xa.T @ xa / 2
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            assert_allclose(hvp(net, (x, t), e), expected[:, j], atol=1e-12)

    def test_empty_batch_rejected(self, rng):
        net = _tanh_net(rng)
        with pytest.raises(ValueError):
            hvp(net, [], np.zeros(net.n_params))


class TestOptimizer:
    """Optimizer steps and poisoned-gradient refusal."""

    def test_sgd_step_is_plain_descent(self):
        net = Network([1, 1], [Activation.IDENTITY], np.array([1.0, 2.0]))
        opt = OptimizerState(lr=0.1, kind=OptimizerKind.SGD)
        optimizer_step(opt, net, np.array([1.0, -1.0]))
        assert_allclose(net.flat_params(), [0.9, 2.1])
        assert opt.step_count == 1

    def test_convex_quadratic_loss_decreases(self, rng):
        net = Network([2, 1], [Activation.IDENTITY], rng.normal(size=3))
        x = rng.normal(size=(16, 2))
        t = (x @ np.array([1.5, -2.0]) + 0.3).reshape(-1, 1)
        opt = OptimizerState(lr=0.05, kind=OptimizerKind.SGD)
        loss_fn = batch_loss_fn(net, as_tensor(x), as_tensor(t))
        losses = []
        for _ in range(100):
            loss = loss_fn(net.params)
            (g,) = torch.autograd.grad(loss, net.params)
            losses.append(float(loss))
            optimizer_step(opt, net, g)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_adam_moments_exposed(self, rng):
        net = _tanh_net(rng)
        opt = OptimizerState(lr=1e-3)
        assert opt.first_moment is None
        optimizer_step(opt, net, np.ones(net.n_params))
        assert opt.first_moment.shape == (net.n_params,)
        assert np.all(opt.second_moment > 0)

    def test_non_finite_gradient_refused(self, rng):
        net = _tanh_net(rng)
        before = net.flat_params()
        g = np.zeros(net.n_params)
        g[0] = np.nan
        with pytest.raises(NonFiniteGradientError):
            optimizer_step(OptimizerState(), net, g)
        assert_allclose(net.flat_params(), before)

    def test_gradient_length_checked(self, rng):
        net = _tanh_net(rng)
        with pytest.raises(DimensionError):
            optimizer_step(OptimizerState(), net, np.zeros(net.n_params + 1))

    def test_non_positive_learning_rate(self):
        with pytest.raises(ValueError):
            OptimizerState(lr=0.0)
