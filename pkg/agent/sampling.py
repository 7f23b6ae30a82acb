import numpy as np

from core.models.quantum import Action


def gumbel_argmax(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Index of argmax(log p_i + g_i) with g_i ~ Gumbel(0, 1).

    Zero-probability entries have log p = -inf and are never chosen.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or len(probs) == 0:
        raise ValueError("probabilities must be a non-empty vector")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be finite and nonnegative")
    if probs.sum() <= 0:
        raise ValueError("probability vector is all zeros")
    with np.errstate(divide="ignore"):
        log_p = np.log(probs)
    return int(np.argmax(log_p + rng.gumbel(size=len(probs))))


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> Action:
    return Action(gumbel_argmax(probs, rng))


def greedy_action(probs: np.ndarray) -> Action:
    return Action(int(np.argmax(probs)))
