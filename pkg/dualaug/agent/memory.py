"""
Replay memory for the augmentation agent.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..windows import Action


@dataclass
class Transition:
    """(state, action, reward, next state) with the reward in [0, 1]."""

    state: np.ndarray
    action: Action
    reward: float
    next_state: np.ndarray

    def __post_init__(self):
        self.action = Action(self.action)
        if not 0.0 <= self.reward <= 1.0:
            raise ValueError(f"reward must be in [0, 1], got {self.reward}")
        self.state = np.asarray(self.state, dtype=np.float64)
        self.next_state = np.asarray(self.next_state, dtype=np.float64)
        if self.state.shape != self.next_state.shape:
            raise ValueError(f"state shapes differ: {self.state.shape} vs {self.next_state.shape}")


class ReplayMemory:
    """Fixed-capacity ring buffer; once full, each push overwrites the oldest entry."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._items: List[Optional[Transition]] = [None] * capacity
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def is_full(self) -> bool:
        return self._size == self.capacity

    def push(self, transition: Transition):
        self._items[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def items(self) -> List[Transition]:
        """Stored transitions, oldest first."""
        if not self.is_full:
            return list(self._items[:self._size])
        return self._items[self._cursor:] + self._items[:self._cursor]

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """Uniform minibatch without replacement (capped at the current size)."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay memory")
        n = min(batch_size, self._size)
        idx = rng.choice(self._size, size=n, replace=False)
        return [self._items[i] for i in idx]
