import numpy as np


def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    gae_lambda: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates over a flat batch of whole episodes.

    `dones[t]` marks the last step of an episode; the value after it is 0.
    Returns raw (unnormalized) advantages and the critic targets A + V.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if not (rewards.shape == values.shape == dones.shape):
        raise ValueError("rewards, values and dones must have the same shape")
    if len(dones) and not dones[-1]:
        raise ValueError("batch must end on an episode boundary")

    advantages = np.zeros_like(rewards)
    last = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        next_value = 0.0 if dones[t] else values[t + 1]
        carry = 0.0 if dones[t] else last
        delta = rewards[t] + gamma * next_value - values[t]
        last = delta + gamma * gae_lambda * carry
        advantages[t] = last
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    advantages = np.asarray(advantages, dtype=float)
    if len(advantages) < 2:
        return advantages - advantages.mean() if len(advantages) else advantages
    return (advantages - advantages.mean()) / (advantages.std() + eps)
