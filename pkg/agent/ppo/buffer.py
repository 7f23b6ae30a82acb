from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..policy import DecisionRecord


@dataclass
class TransitionBatch:
    """Flattened cycles of whole episodes, in collection order."""

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.actions)
        for name in ("observations", "log_probs", "rewards", "dones", "values"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} rows, expected {n}")
        if n and not self.dones[-1]:
            raise ValueError("batch must end with a finished episode")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("batch holds non-finite rewards")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def n_episodes(self) -> int:
        return int(np.sum(self.dones))

    def episode_returns(self) -> np.ndarray:
        """Undiscounted return of each episode."""
        ends = np.flatnonzero(self.dones)
        starts = np.concatenate([[0], ends[:-1] + 1])
        return np.array([self.rewards[s : e + 1].sum() for s, e in zip(starts, ends)])

    @classmethod
    def from_episodes(
        cls,
        records: Sequence[Sequence[DecisionRecord]],
        rewards: Sequence[np.ndarray],
        values: np.ndarray,
    ) -> "TransitionBatch":
        """Stack per-episode decision records and rewards; `values` is per cycle."""
        if len(records) != len(rewards):
            raise ValueError("one reward vector per episode is required")
        flat = [r for episode in records for r in episode]
        if not flat:
            raise ValueError("batch is empty")
        dones = []
        for episode_records, episode_rewards in zip(records, rewards):
            if len(episode_records) != len(episode_rewards):
                raise ValueError("reward count does not match the episode's decisions")
            dones.extend([False] * (len(episode_records) - 1) + [True])
        return cls(
            observations=np.stack([r.observation for r in flat]),
            actions=np.array([int(r.action) for r in flat], dtype=np.int64),
            log_probs=np.array([r.log_prob for r in flat]),
            rewards=np.concatenate(rewards),
            dones=np.array(dones, dtype=bool),
            values=np.asarray(values, dtype=float),
        )
