"""
VALUE-LEARNING AGENT
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Online and target Q-networks over window-state features, greedy action
choice, temporal-difference updates, and target synchronization.
"""

from typing import List, Optional, Sequence
import logging

import numpy as np
import torch

from ..detector import read_checkpoint, write_checkpoint
from ..nncore import (
    Activation,
    DimensionError,
    Network,
    OptimizerKind,
    OptimizerState,
    as_tensor,
    optimizer_step,
)
from ..windows import ALL_ACTIONS, Action
from .memory import ReplayMemory, Transition

logger = logging.getLogger(__name__)

N_ACTIONS = len(ALL_ACTIONS)


def q_values(net: Network, state) -> np.ndarray:
    """One value per action for a single state."""
    x = as_tensor(state).reshape(-1)
    if x.numel() != net.n_inputs:
        raise DimensionError("state features", net.n_inputs, x.numel())
    with torch.no_grad():
        return net.apply(x.unsqueeze(0))[0].numpy().copy()


def select_action(q, allowed: Optional[Sequence[Action]] = None) -> Action:
    """Argmax over the allowed actions; ties go to expand < preserve < delete."""
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.size != N_ACTIONS:
        raise DimensionError("q values", N_ACTIONS, q.size)
    if not np.all(np.isfinite(q)):
        raise ValueError(f"q values must be finite, got {q}")
    allowed = ALL_ACTIONS if allowed is None else tuple(sorted(Action(a) for a in allowed))
    best = max(allowed, key=lambda a: (q[a], -int(a)))
    return Action(best)


class QAgent:
    """
    Online network trained every TD update; target network refreshed by
    copying the online parameters on ``sync_target``.
    """

    def __init__(
        self,
        n_features: int,
        rng: np.random.Generator,
        hidden_sizes: Sequence[int] = (64, 64),
        gamma: float = 0.9,
        sync_period: int = 10,
        double_dqn: bool = False,
        lr: float = 1e-3,
        optimizer: OptimizerKind = OptimizerKind.ADAM,
        allowed_actions: Sequence[Action] = ALL_ACTIONS,
        memory_capacity: int = 2048,
        online: Optional[Network] = None,
    ):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {gamma}")
        if sync_period < 1:
            raise ValueError(f"sync period must be positive, got {sync_period}")

        sizes = [n_features, *hidden_sizes, N_ACTIONS]
        activations = [Activation.TANH] * len(hidden_sizes) + [Activation.IDENTITY]
        self.online = online if online is not None else Network.build(sizes, activations, rng)
        if self.online.n_inputs != n_features or self.online.n_outputs != N_ACTIONS:
            raise DimensionError("q network input", n_features, self.online.n_inputs)
        self.target = self.online.clone()

        self.gamma = gamma
        self.sync_period = sync_period
        self.double_dqn = double_dqn
        self.allowed_actions = tuple(sorted(Action(a) for a in allowed_actions))
        self.optimizer = OptimizerState(lr=lr, kind=optimizer)
        self.memory = ReplayMemory(memory_capacity)
        self.td_steps = 0
        self.syncs = 0

    @property
    def n_features(self) -> int:
        return self.online.n_inputs

    def act(self, state) -> Action:
        return select_action(q_values(self.online, state), self.allowed_actions)

    def _mask(self) -> torch.Tensor:
        mask = torch.full((N_ACTIONS,), float("-inf"), dtype=torch.float64)
        mask[[int(a) for a in self.allowed_actions]] = 0.0
        return mask

    def td_update(self, minibatch: List[Transition]) -> float:
        """
        One gradient step on mean (r + gamma * max_a' Q_target(s', a') - Q_online(s, a))^2.

        Returns:
            The loss before the step
        """
        if not minibatch:
            raise ValueError("td update needs a nonempty minibatch")

        states = as_tensor(np.stack([t.state for t in minibatch]))
        next_states = as_tensor(np.stack([t.next_state for t in minibatch]))
        actions = torch.as_tensor([int(t.action) for t in minibatch])
        rewards = as_tensor([t.reward for t in minibatch])
        if states.shape[1] != self.n_features:
            raise DimensionError("state features", self.n_features, states.shape[1])

        with torch.no_grad():
            mask = self._mask()
            next_target = self.target.apply(next_states) + mask
            if self.double_dqn:
                chosen = (self.online.apply(next_states) + mask).argmax(dim=1)
                bootstrap = next_target.gather(1, chosen.unsqueeze(1)).squeeze(1)
            else:
                bootstrap = next_target.max(dim=1).values
            y = rewards + self.gamma * bootstrap

        predicted = self.online.apply(states).gather(1, actions.unsqueeze(1)).squeeze(1)
        loss = ((y - predicted) ** 2).mean()
        (gradient,) = torch.autograd.grad(loss, self.online.params)
        optimizer_step(self.optimizer, self.online, gradient)
        self.td_steps += 1
        return float(loss.detach())

    def sync_target(self):
        """Overwrite the target parameters with the online parameters, bit-exact."""
        with torch.no_grad():
            self.target.params.copy_(self.online.params)
        self.syncs += 1

    def train_from(self, memory: ReplayMemory, batch_size: int, updates: int, rng: np.random.Generator) -> List[float]:
        """Run TD updates from replay, syncing every ``sync_period`` updates."""
        losses = []
        for _ in range(updates):
            if len(memory) == 0:
                break
            losses.append(self.td_update(memory.sample(batch_size, rng)))
            if self.td_steps % self.sync_period == 0:
                self.sync_target()
        return losses

    def save(self, path, extra: Optional[dict] = None):
        header = {
            "gamma": self.gamma,
            "sync_period": self.sync_period,
            "double_dqn": self.double_dqn,
            "allowed_actions": [int(a) for a in self.allowed_actions],
            "td_steps": self.td_steps,
            **(extra or {}),
        }
        write_checkpoint(path, "agent", self.online, header)

    @classmethod
    def load(cls, path) -> 'QAgent':
        meta, net = read_checkpoint(path, "agent")
        agent = cls(
            n_features=net.n_inputs,
            rng=np.random.default_rng(0),
            hidden_sizes=net.layer_sizes[1:-1],
            gamma=meta["gamma"],
            sync_period=meta["sync_period"],
            double_dqn=meta["double_dqn"],
            allowed_actions=[Action(a) for a in meta["allowed_actions"]],
            online=net,
        )
        agent.td_steps = meta.get("td_steps", 0)
        return agent


def td_update(agent: QAgent, minibatch: List[Transition]) -> float:
    return agent.td_update(minibatch)


def sync_target(agent: QAgent) -> QAgent:
    agent.sync_target()
    return agent
