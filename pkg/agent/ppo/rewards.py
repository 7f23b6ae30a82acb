import numpy as np

from core.models.config import RewardConfig
from core.models.quantum import Episode
from core.models.readout import FilterWeights
from core.readout import integrate_many


class MissingVerificationError(ValueError):
    """Raised when an episode has no verification trace to close its reward."""

    pass


def episode_signals(episode: Episode, weights: FilterWeights) -> np.ndarray:
    """U_1..U_n of the cycles followed by U_ver, length n + 1."""
    if episode.verification is None:
        raise MissingVerificationError("episode has no verification measurement")
    return integrate_many(list(episode.observations) + [episode.verification], weights)


def compute_rewards(episode: Episode, rc: RewardConfig, weights: FilterWeights) -> np.ndarray:
    """r_t = (U_{t+1} - U_t) / (U_g - U_e) - lambda, with U_{n+1} the verification signal.

    The sum telescopes to (U_ver - U_1) / (U_g - U_e) - n * lambda.
    """
    if rc.u_g is None or rc.u_e is None:
        raise ValueError("reward references u_g/u_e are not calibrated")
    if rc.u_g == rc.u_e:
        raise ValueError("reward references u_g and u_e must differ")
    u = episode_signals(episode, weights)
    rewards = np.diff(u) / (rc.u_g - rc.u_e) - rc.lambda_penalty
    if not np.all(np.isfinite(rewards)):
        raise ValueError("non-finite reward")
    return rewards
