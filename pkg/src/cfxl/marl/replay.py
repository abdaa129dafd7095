"""Fixed-capacity experience replay with uniform sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Transition:
    """One stored step: joint observation/action, per-agent rewards."""

    joint_obs: np.ndarray
    joint_action: np.ndarray
    rewards: np.ndarray
    joint_next_obs: np.ndarray
    done: bool

    def __post_init__(self) -> None:
        for name in ("joint_obs", "joint_action", "rewards", "joint_next_obs"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class TransitionBatch:
    """Column-stacked sample of transitions."""

    joint_obs: np.ndarray
    joint_action: np.ndarray
    rewards: np.ndarray
    joint_next_obs: np.ndarray
    done: np.ndarray

    @property
    def size(self) -> int:
        return self.joint_obs.shape[0]


class ReplayBuffer:
    """Ring buffer: overwrites the oldest entry once capacity is reached."""

    def __init__(self, capacity: int, joint_obs_dim: int, joint_action_dim: int, n_agents: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self._obs = np.zeros((capacity, joint_obs_dim))
        self._act = np.zeros((capacity, joint_action_dim))
        self._rew = np.zeros((capacity, n_agents))
        self._next_obs = np.zeros((capacity, joint_obs_dim))
        self._done = np.zeros(capacity, dtype=bool)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        if t.joint_obs.shape != (self._obs.shape[1],):
            raise ValueError(
                f"joint_obs dim {t.joint_obs.shape[0]} does not match buffer {self._obs.shape[1]}"
            )
        if t.joint_action.shape != (self._act.shape[1],):
            raise ValueError(
                f"joint_action dim {t.joint_action.shape[0]} does not match buffer {self._act.shape[1]}"
            )
        if t.rewards.shape != (self._rew.shape[1],):
            raise ValueError(
                f"rewards dim {t.rewards.shape[0]} does not match buffer {self._rew.shape[1]}"
            )
        i = self._cursor
        self._obs[i] = t.joint_obs
        self._act[i] = t.joint_action
        self._rew[i] = t.rewards
        self._next_obs[i] = t.joint_next_obs
        self._done[i] = t.done
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Uniform sample with replacement over the stored entries."""
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if self._size < batch_size:
            raise ValueError(f"buffer holds {self._size} < batch_size {batch_size} transitions")
        idx = rng.integers(0, self._size, size=batch_size)
        return TransitionBatch(
            joint_obs=self._obs[idx].copy(),
            joint_action=self._act[idx].copy(),
            rewards=self._rew[idx].copy(),
            joint_next_obs=self._next_obs[idx].copy(),
            done=self._done[idx].copy(),
        )
