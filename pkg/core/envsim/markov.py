"""Continuous-time Markov jump dynamics of the transmon levels.

Rates: E->G at 1/t1_e, F->E at 1/t1_f and rethermalization G->E at
p_therm/t1_e. Trajectories are drawn with the Gillespie algorithm; the
generator matrix also gives exact transition probabilities via expm(Q t).
"""

import logging

import numpy as np
from scipy.linalg import expm, null_space

from core.models.config import EnvConfig
from core.models.quantum import EnvState, QuantumLevel

logger = logging.getLogger(__name__)

Path = list[tuple[float, QuantumLevel]]


def rate_matrix(cfg: EnvConfig) -> np.ndarray:
    """Generator Q with Q[i, j] the rate i -> j and rows summing to zero."""
    n = cfg.levels
    q = np.zeros((n, n))
    q[QuantumLevel.G, QuantumLevel.E] = cfg.p_therm / cfg.t1_e
    q[QuantumLevel.E, QuantumLevel.G] = 1.0 / cfg.t1_e
    if n == 3:
        q[QuantumLevel.F, QuantumLevel.E] = 1.0 / cfg.t1_f
    q[np.diag_indices(n)] = -q.sum(axis=1)
    return q


def transition_probabilities(cfg: EnvConfig, duration: float) -> np.ndarray:
    """P(t) = exp(Q t); row i is the level distribution after starting in i."""
    return expm(rate_matrix(cfg) * duration)


def stationary_distribution(cfg: EnvConfig) -> np.ndarray:
    """Left null vector of Q, normalized. E-population is p/(1+p) for two levels."""
    pi = null_space(rate_matrix(cfg).T)[:, 0]
    return pi / pi.sum()


def sample_path(
    level: QuantumLevel,
    duration: float,
    cfg: EnvConfig,
    rng: np.random.Generator,
    q: np.ndarray | None = None,
) -> Path:
    """Jump trajectory over [0, duration] starting in `level`.

    Returns (time, level) pairs with strictly increasing times; the first
    entry is (0.0, level) and the last entry holds the level at `duration`.
    """
    path: Path = [(0.0, QuantumLevel(level))]
    if duration <= 0:
        return path
    if q is None:
        q = rate_matrix(cfg)

    t = 0.0
    current = int(level)
    while True:
        rate = -q[current, current]
        if rate <= 0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= duration:
            break
        targets = np.flatnonzero(q[current] > 0)
        targets = targets[targets != current]
        if len(targets) == 1:
            current = int(targets[0])
        else:
            probs = q[current, targets] / rate
            current = int(rng.choice(targets, p=probs))
        path.append((t, QuantumLevel(current)))
    return path


def evolve(
    state: EnvState,
    duration: float,
    cfg: EnvConfig,
    rng: np.random.Generator,
) -> EnvState:
    """Idle time evolution of the hidden state."""
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    if duration == 0:
        return state
    path = sample_path(state.level, duration, cfg, rng)
    return EnvState(path[-1][1], state.elapsed + duration)
