"""Fixed-capacity FIFO experience store with uniform minibatch sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Experience:
    """One joint transition. Arrays are indexed by agent along axis 0.

    ``caps`` / ``next_caps`` hold each agent's insurance risky-mass cap at
    ``state`` / ``next_state``; actions are stored as executed, i.e. after
    the insurance projection.
    """

    state: np.ndarray        # (N, obs_dim)
    actions: np.ndarray      # (N, D + 1) or (N,) template indices
    rewards: np.ndarray      # (N,)
    next_state: np.ndarray   # (N, obs_dim)
    done: bool
    caps: np.ndarray         # (N,)
    next_caps: np.ndarray    # (N,)

    def __post_init__(self):
        n = self.state.shape[0]
        if self.next_state.shape != self.state.shape:
            raise ValueError("state and next_state differ in shape")
        if self.actions.shape[0] != n or self.rewards.shape != (n,):
            raise ValueError("need exactly one action and one reward per agent")


@dataclass(frozen=True)
class Batch:
    state: np.ndarray        # (K, N, obs_dim)
    actions: np.ndarray      # (K, N, D + 1)
    rewards: np.ndarray      # (K, N)
    next_state: np.ndarray
    done: np.ndarray         # (K,)
    caps: np.ndarray         # (K, N)
    next_caps: np.ndarray

    def __len__(self) -> int:
        return self.state.shape[0]


class ReplayBuffer:
    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.rng = rng
        self._store: dict[str, np.ndarray] | None = None
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def _allocate(self, e: Experience) -> None:
        c = self.capacity
        self._store = {
            "state": np.empty((c,) + e.state.shape),
            "actions": np.empty((c,) + e.actions.shape, dtype=e.actions.dtype),
            "rewards": np.empty((c,) + e.rewards.shape),
            "next_state": np.empty((c,) + e.next_state.shape),
            "done": np.empty(c, dtype=bool),
            "caps": np.empty((c,) + e.caps.shape),
            "next_caps": np.empty((c,) + e.next_caps.shape),
        }

    def add(self, e: Experience) -> None:
        if self._store is None:
            self._allocate(e)
        k = self._next
        for name, arr in self._store.items():
            arr[k] = getattr(e, name)
        self._next = (k + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        """Storage slots from oldest to newest."""
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def _gather(self, idx: np.ndarray) -> Batch:
        return Batch(**{name: arr[idx] for name, arr in self._store.items()})

    def sample(self, k: int) -> Batch:
        """Uniform minibatch of ``k`` distinct experiences."""
        if k > self._size:
            raise ValueError(f"cannot sample {k} from a buffer holding {self._size}")
        idx = self.rng.choice(self._size, size=k, replace=False)
        return self._gather(self._order()[idx])

    def contents(self) -> Batch:
        """Everything currently stored, oldest first."""
        if not self._size:
            raise ValueError("buffer is empty")
        return self._gather(self._order())
