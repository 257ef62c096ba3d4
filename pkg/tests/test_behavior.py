"""
Tests for parameter behavior and the dual reward
================================================
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dualaug.behavior import (
    BehaviorInvestigator,
    ConvergenceError,
    HessianMode,
    HessianSettings,
    InverseHessian,
    KeyParams,
    RewardNormalizer,
    behavior_center,
    dual_reward,
    normalize_rewards,
    parameter_behavior,
    select_key_parameters,
    solve_damped,
)
from dualaug.nncore import as_tensor, per_sample_grads
from dualaug.validation import check_influence, check_solver
from dualaug.windows import Action


class TestSolver:
    """Damped conjugate gradients."""

    def test_matches_dense_solve(self, rng):
        a = rng.normal(size=(6, 6))
        h = a @ a.T
        g = rng.normal(size=6)
        x = solve_damped(lambda v: h @ v, g, damping=0.5)
        assert_allclose(x, np.linalg.solve(h + 0.5 * np.eye(6), g), rtol=1e-8)

    def test_zero_rhs(self):
        assert_allclose(solve_damped(lambda v: v, np.zeros(4), 1.0), np.zeros(4))

    def test_iteration_cap_raises(self, rng):
        h = np.diag(np.logspace(0, 6, 40))
        with pytest.raises(ConvergenceError) as info:
            solve_damped(lambda v: h @ v, rng.normal(size=40), damping=1e-3, max_iter=2, tol=1e-14)
        assert info.value.residual_norm > 0

    def test_damping_must_be_positive(self):
        with pytest.raises(ValueError):
            HessianSettings(HessianMode.CG, damping=0.0)
        HessianSettings(HessianMode.IDENTITY, damping=0.0)


class TestInverseHessian:

    def test_identity_mode_returns_gradients(self, small_detector, sample_set):
        windows = sample_set.matrix()
        inverse = InverseHessian(small_detector.net, windows, settings=HessianSettings(HessianMode.IDENTITY))
        g = np.ones((2, small_detector.net.n_params))
        assert_allclose(inverse.apply(g), g)

    def test_diagonal_mode_uses_mean_squared_gradients(self, small_detector, sample_set):
        windows = sample_set.matrix()
        settings = HessianSettings(HessianMode.DIAGONAL, damping=1e-2)
        inverse = InverseHessian(small_detector.net, windows, settings=settings)
        grads = per_sample_grads(small_detector.net, as_tensor(windows), as_tensor(windows)).numpy()
        diag = (grads ** 2).mean(axis=0)
        assert_allclose(inverse.apply(grads[:1])[0], grads[0] / (diag + 1e-2), rtol=1e-10)

    def test_subsample_caps_batch(self, small_detector, sample_set, rng):
        settings = HessianSettings(HessianMode.CG, subsample=5)
        inverse = InverseHessian(small_detector.net, sample_set.matrix(), settings=settings, rng=rng)
        assert inverse.inputs.shape[0] == 5

    def test_empty_batch_rejected(self, small_detector):
        with pytest.raises(ValueError):
            InverseHessian(small_detector.net, np.zeros((0, 12)))

    def test_ridge_influence_matches_retraining(self):
        result = check_influence()
        assert result.passed, result.metrics

    def test_cg_matches_dense_hessian(self):
        result = check_solver()
        assert result.passed, result.metrics
        assert result.metrics['fd_hvp_relative_error'] < 1e-4


class TestKeyParameters:

    def test_selects_largest_mean(self):
        behaviors = np.array([[0.1, 5.0, 0.2, 3.0], [0.3, 4.0, 0.0, 2.0]])
        assert list(select_key_parameters(behaviors, 2).indices) == [1, 3]

    def test_ties_go_to_lower_index(self):
        keys = select_key_parameters(np.ones((3, 5)), 2)
        assert list(keys.indices) == [0, 1]

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            select_key_parameters(np.ones((2, 3)), 4)
        with pytest.raises(ValueError):
            select_key_parameters(np.ones((2, 3)), 0)

    def test_unsorted_indices_rejected(self):
        with pytest.raises(ValueError):
            KeyParams(np.array([3, 1]))

    def test_parameter_behavior_restricted_to_keys(self, small_detector, sample_set):
        samples = list(sample_set)
        keys = KeyParams(np.array([0, 4, 9]))
        full = parameter_behavior(small_detector, samples[0], samples)
        restricted = parameter_behavior(small_detector, samples[0], samples, keys=keys)
        assert np.all(full >= 0)
        assert_allclose(restricted, full[[0, 4, 9]])

    def test_center_is_mean(self):
        assert_allclose(behavior_center([np.array([1.0, 2.0]), np.array([3.0, 6.0])]), [2.0, 4.0])


class TestRewards:
    """Normalization and the dual reward table."""

    def test_min_max(self):
        assert_allclose(normalize_rewards([2.0, 4.0, 3.0]), [0.0, 1.0, 0.5])

    def test_constant_maps_to_half(self):
        assert_allclose(normalize_rewards([7.0, 7.0]), [0.5, 0.5])

    def test_later_values_are_clipped(self):
        scale = RewardNormalizer([1.0, 3.0])
        assert_allclose(scale([0.0, 2.0, 10.0]), [0.0, 0.5, 1.0])

    @pytest.mark.parametrize("action,expected", [
        (Action.EXPAND, 0.6 * 0.8 + 0.4 * 0.7),
        (Action.PRESERVE, 0.6 * 0.2 + 0.4 * 0.7),
        (Action.DELETE, 0.6 * 0.8 + 0.4 * 0.3),
    ])
    def test_dual_reward_table(self, action, expected):
        assert dual_reward(0.8, 0.3, action, 0.6) == pytest.approx(expected)

    def test_alpha_one_is_loss_only(self):
        assert dual_reward(0.9, 0.1, Action.DELETE, 1.0) == pytest.approx(0.9)
        assert dual_reward(0.9, 0.1, Action.PRESERVE, 1.0) == pytest.approx(0.1)

    def test_alpha_zero_is_parameter_only(self):
        assert dual_reward(0.9, 0.25, Action.EXPAND, 0.0) == pytest.approx(0.75)

    def test_out_of_range_inputs(self):
        with pytest.raises(ValueError):
            dual_reward(1.2, 0.0, Action.EXPAND, 0.5)
        with pytest.raises(ValueError):
            dual_reward(0.5, 0.0, Action.EXPAND, -0.1)


class TestInvestigator:

    def test_records_cover_population(self, small_detector, sample_set, rng):
        inv = BehaviorInvestigator(small_detector, sample_set, HessianSettings(), k=10, rng=rng,
                                   classify=lambda s: "simple")
        records = inv.records()
        assert len(records) == len(sample_set)
        assert inv.keys.k == 10
        r_l = np.array([r.r_l for r in records])
        r_p = np.array([r.r_p for r in records])
        assert r_l.min() == 0.0 and r_l.max() == 1.0
        assert r_p.min() == 0.0 and r_p.max() == 1.0
        assert {r.kind for r in records} == {"simple"}

    def test_k_capped_by_parameter_count(self, small_detector, sample_set, rng):
        inv = BehaviorInvestigator(small_detector, sample_set, HessianSettings(), k=10**6, rng=rng)
        assert inv.keys.k == small_detector.net.n_params

    def test_new_sample_scored_against_frozen_scales(self, small_detector, sample_set, rng):
        inv = BehaviorInvestigator(small_detector, sample_set, HessianSettings(), k=10, rng=rng)
        s = sample_set.add(5)
        record = inv.record(s)
        assert 0.0 <= record.r_l <= 1.0
        assert 0.0 <= record.r_p <= 1.0
        assert record.r_l_raw == pytest.approx(small_detector.sample_loss(s))
        assert inv.record(s) is record

    def test_frame_columns(self, small_detector, sample_set, rng):
        frame = BehaviorInvestigator(small_detector, sample_set, HessianSettings(), k=5, rng=rng).to_frame()
        assert list(frame.columns) == ["sample_id", "start", "r_l_raw", "r_p_raw", "r_l", "r_p", "class"]
