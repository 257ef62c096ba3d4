"""
Augmentation environment: state features, rewards and transitions over a
sample set, plus replay warm start.
"""

from typing import Collection, Sequence
import logging

import numpy as np

from ..behavior import BehaviorInvestigator, dual_reward
from ..windows import ALL_ACTIONS, Action, SampleSet, WindowSample, transition
from .memory import ReplayMemory, Transition

logger = logging.getLogger(__name__)


class AugmentationEnvironment:
    """
    Scores (sample, action) pairs for one augmentation call.

    Args:
        investigator: Behavior of the current training set
        alpha: Balance between loss and parameter rewards
        p_explore: Probability of a random transition
        state_with_rewards: Append (r_l, r_p) to the window features
        allowed_actions: Actions the agent may take
    """

    def __init__(
        self,
        investigator: BehaviorInvestigator,
        alpha: float = 0.5,
        p_explore: float = 0.2,
        state_with_rewards: bool = False,
        allowed_actions: Sequence[Action] = ALL_ACTIONS,
    ):
        self.investigator = investigator
        self.alpha = alpha
        self.p_explore = p_explore
        self.state_with_rewards = state_with_rewards
        self.allowed_actions = tuple(sorted(Action(a) for a in allowed_actions))

    def features(self, s: WindowSample) -> np.ndarray:
        flat = s.flat()
        if not self.state_with_rewards:
            return flat.copy()
        record = self.investigator.record(s)
        return np.concatenate([flat, [record.r_l, record.r_p]])

    def reward(self, s: WindowSample, a: Action) -> float:
        record = self.investigator.record(s)
        return dual_reward(record.r_l, record.r_p, a, self.alpha)

    def next_sample(
        self,
        S: SampleSet,
        s: WindowSample,
        a: Action,
        rng: np.random.Generator,
        exclude: Collection[int] = (),
    ) -> WindowSample:
        return transition(S, s, a, self.p_explore, rng, exclude)


def feature_size(w: int, n_features: int, state_with_rewards: bool) -> int:
    return w * n_features + (2 if state_with_rewards else 0)


def warm_start(
    env: AugmentationEnvironment,
    S: SampleSet,
    memory: ReplayMemory,
    steps: int,
    rng: np.random.Generator,
) -> ReplayMemory:
    """
    Fill replay with random experience: uniform state, uniform action,
    its reward and the transition it would cause. ``S`` is not modified.
    """
    if len(S) == 0:
        raise ValueError("warm start needs a nonempty sample set")
    if steps > memory.capacity:
        logger.warning(f"Warm start of {steps} steps exceeds memory capacity {memory.capacity}")

    members = list(S)
    actions = env.allowed_actions
    for _ in range(steps):
        s = members[int(rng.integers(len(members)))]
        a = actions[int(rng.integers(len(actions)))]
        r = env.reward(s, a)
        s_next = env.next_sample(S, s, a, rng)
        memory.push(Transition(env.features(s), a, r, env.features(s_next)))

    logger.debug(f"Warm start pushed {steps} transitions ({len(memory)} in memory)")
    return memory
