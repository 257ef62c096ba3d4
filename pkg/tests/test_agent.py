"""
Tests for the augmentation agent
================================

Greedy choice, TD learning, target sync, replay and warm start.
"""

from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import chisquare

from dualaug.agent import (
    AugmentationEnvironment,
    ClusterPolicy,
    QAgent,
    ReplayMemory,
    Transition,
    feature_size,
    q_values,
    select_action,
    sync_target,
    td_update,
    warm_start,
)
from dualaug.behavior import BehaviorInvestigator, HessianSettings, dual_reward
from dualaug.nncore import OptimizerKind
from dualaug.validation import TOY_GAMMA, TOY_REWARDS, check_mdp, value_iteration
from dualaug.windows import Action


def _transition(state, action=0, reward=0.5, next_state=None):
    state = np.asarray(state, dtype=float)
    return Transition(state, action, reward, state if next_state is None else next_state)


class TestSelectAction:

    def test_argmax(self):
        assert select_action([0.1, 0.7, 0.3]) is Action.PRESERVE

    def test_ties_prefer_expand_then_preserve(self):
        assert select_action([0.5, 0.5, 0.5]) is Action.EXPAND
        assert select_action([0.1, 0.5, 0.5]) is Action.PRESERVE

    def test_mask_restricts_choice(self):
        assert select_action([0.9, 0.1, 0.5], allowed=[Action.PRESERVE, Action.DELETE]) is Action.DELETE

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            select_action([0.0, np.nan, 1.0])


class TestQAgent:

    @pytest.fixture
    def agent(self, rng):
        return QAgent(4, rng, hidden_sizes=(8,), gamma=0.0, sync_period=3, lr=0.05, optimizer=OptimizerKind.SGD)

    def test_q_values_shape(self, agent):
        assert q_values(agent.online, np.zeros(4)).shape == (3,)

    def test_target_starts_equal_to_online(self, agent):
        assert_allclose(agent.target.flat_params(), agent.online.flat_params())

    def test_td_update_leaves_target_alone(self, agent):
        before = agent.target.flat_params()
        td_update(agent, [_transition(np.ones(4))])
        assert_allclose(agent.target.flat_params(), before)
        assert np.any(agent.online.flat_params() != before)

    def test_zero_discount_regresses_to_reward(self, agent):
        state = np.array([1.0, -1.0, 0.5, 0.0])
        batch = [_transition(state, Action.DELETE, 0.8)]
        losses = [td_update(agent, batch) for _ in range(300)]
        assert losses[-1] < losses[0]
        assert q_values(agent.online, state)[Action.DELETE] == pytest.approx(0.8, abs=1e-2)

    def test_sync_copies_exactly(self, agent):
        td_update(agent, [_transition(np.ones(4))])
        sync_target(agent)
        np.testing.assert_array_equal(agent.target.flat_params(), agent.online.flat_params())
        assert agent.syncs == 1

    def test_train_from_syncs_every_period(self, agent, rng):
        memory = ReplayMemory(8)
        memory.push(_transition(np.ones(4)))
        agent.train_from(memory, 4, 7, rng)
        assert agent.td_steps == 7
        assert agent.syncs == 2

    def test_bad_gamma(self, rng):
        with pytest.raises(ValueError):
            QAgent(4, rng, gamma=1.5)

    def test_checkpoint_round_trip(self, agent, tmp_path):
        td_update(agent, [_transition(np.ones(4))])
        path = tmp_path / "agent.npz"
        agent.save(path)
        loaded = QAgent.load(path)
        assert_allclose(loaded.online.flat_params(), agent.online.flat_params())
        assert loaded.td_steps == 1
        assert loaded.sync_period == 3

    def test_toy_mdp_policy(self):
        optimal = value_iteration(TOY_REWARDS, TOY_GAMMA).argmax(axis=1)
        assert list(optimal) == [2, 0, 0]
        result = check_mdp()
        assert result.passed, result.metrics


class TestReplayMemory:

    def test_fifo_overwrite(self):
        memory = ReplayMemory(3)
        for i in range(5):
            memory.push(_transition([float(i)]))
        assert len(memory) == 3
        assert [t.state[0] for t in memory.items()] == [2.0, 3.0, 4.0]

    def test_sample_without_replacement(self, rng):
        memory = ReplayMemory(10)
        for i in range(4):
            memory.push(_transition([float(i)]))
        batch = memory.sample(10, rng)
        assert sorted(t.state[0] for t in batch) == [0.0, 1.0, 2.0, 3.0]

    def test_empty_sample(self, rng):
        with pytest.raises(ValueError):
            ReplayMemory(2).sample(1, rng)

    def test_transition_validation(self):
        with pytest.raises(ValueError):
            _transition([0.0], reward=1.5)
        with pytest.raises(ValueError):
            Transition(np.zeros(2), 0, 0.5, np.zeros(3))


class TestEnvironment:

    @pytest.fixture
    def env(self, small_detector, sample_set, rng):
        investigator = BehaviorInvestigator(small_detector, sample_set, HessianSettings(), 10, rng)
        return AugmentationEnvironment(investigator, alpha=0.3, p_explore=0.0, state_with_rewards=True)

    def test_features_include_rewards(self, env, sample_set):
        s = next(iter(sample_set))
        features = env.features(s)
        assert features.shape == (feature_size(12, 1, True),)
        record = env.investigator.record(s)
        assert_allclose(features[-2:], [record.r_l, record.r_p])

    def test_reward_uses_dual_table(self, env, sample_set):
        s = next(iter(sample_set))
        record = env.investigator.record(s)
        for a in Action:
            assert env.reward(s, a) == pytest.approx(dual_reward(record.r_l, record.r_p, a, 0.3))

    def test_warm_start_fills_memory_without_touching_set(self, env, sample_set, rng):
        before = sample_set.starts()
        memory = warm_start(env, sample_set, ReplayMemory(64), 16, rng)
        assert len(memory) == 16
        assert sample_set.starts() == before
        assert all(0.0 <= t.reward <= 1.0 for t in memory.items())

    def test_warm_start_respects_action_mask(self, small_detector, sample_set, rng):
        investigator = BehaviorInvestigator(small_detector, sample_set, HessianSettings(), 10, rng)
        env = AugmentationEnvironment(investigator, allowed_actions=[Action.PRESERVE, Action.DELETE])
        memory = warm_start(env, sample_set, ReplayMemory(64), 32, rng)
        assert {t.action for t in memory.items()} <= {Action.PRESERVE, Action.DELETE}

    def test_warm_start_actions_are_uniform(self, env, sample_set, rng):
        memory = warm_start(env, sample_set, ReplayMemory(10_000), 10_000, rng)
        counts = np.bincount([int(t.action) for t in memory.items()], minlength=3)
        assert counts.sum() == 10_000
        assert chisquare(counts).pvalue > 0.001


class FixedBehavior:
    """Investigator stand-in returning preset (r_l, r_p) per start."""

    def __init__(self, points):
        self.points = points

    def record(self, s):
        r_l, r_p = self.points[s.start]
        return SimpleNamespace(r_l=r_l, r_p=r_p)


class TestClusterPolicy:

    @pytest.fixture
    def grouped(self, sample_set, rng):
        corners = {0: (0.05, 0.05), 1: (0.95, 0.05), 2: (0.95, 0.95)}
        points = {}
        for i, s in enumerate(sample_set):
            r_l, r_p = corners[i % 3]
            points[s.start] = (r_l + rng.uniform(-0.03, 0.03), r_p + rng.uniform(-0.03, 0.03))
        return FixedBehavior(points)

    def test_clusters_map_to_their_corner_actions(self, grouped, sample_set, rng):
        policy = ClusterPolicy(grouped, list(sample_set), rng)
        assert sorted(policy.actions) == [Action.EXPAND, Action.PRESERVE, Action.DELETE]
        expected = [Action.PRESERVE, Action.EXPAND, Action.DELETE]
        for i, s in enumerate(sample_set):
            assert policy(s) is expected[i % 3]

    def test_identical_behaviors_form_one_cluster(self, sample_set, rng):
        behavior = FixedBehavior({s.start: (0.9, 0.85) for s in sample_set})
        policy = ClusterPolicy(behavior, list(sample_set), rng)
        assert policy.actions == [Action.DELETE]
        assert all(policy(s) is Action.DELETE for s in sample_set)

    def test_rejects_bad_arguments(self, grouped, sample_set, rng):
        with pytest.raises(ValueError):
            ClusterPolicy(grouped, [], rng)
        with pytest.raises(ValueError):
            ClusterPolicy(grouped, list(sample_set), rng, n_clusters=4)
