"""Validation runs: initialization error and cycle statistics of a policy."""

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from core.envsim import QubitEnvironment
from core.models.quantum import Action, DecisionCallback, Episode, InitialStatePrep, QuantumLevel
from core.readout import ReadoutCalibration, bootstrap_population, extract_populations

logger = logging.getLogger(__name__)


@dataclass
class ValidationMetrics:
    n_episodes: int
    error: float
    mean_cycles: float
    std_cycles: float
    forced_fraction: float
    action_frequencies: dict[str, float]
    rethermalization_floor: float
    # fraction of episodes whose latent level after verification is not g
    latent_error: float
    populations: list[float] = field(default_factory=list)
    error_ci: Optional[tuple[float, float]] = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data["error_ci"] = list(self.error_ci) if self.error_ci is not None else None
        return data


def run_validation_episodes(
    env: QubitEnvironment,
    policy: DecisionCallback,
    n_episodes: int,
    prep: InitialStatePrep,
    max_cycles: Optional[int] = None,
) -> list[Episode]:
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1, got {n_episodes}")
    return [env.run_episode(policy, prep, max_cycles) for _ in range(n_episodes)]


def summarize_episodes(
    episodes: list[Episode],
    calibration: ReadoutCalibration,
    rethermalization_floor: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    n_resamples: int = 0,
    min_bins: Optional[int] = None,
    n_actions: int = 3,
) -> ValidationMetrics:
    """Metrics of finished episodes.

    The ground-state population comes from an amplitude-only fit of the
    verification signals with the calibrated mixture shape.
    """
    if not episodes:
        raise ValueError("no episodes to summarize")
    values = calibration.project_many([ep.verification for ep in episodes])
    kwargs = {"min_bins": min_bins} if min_bins is not None else {}
    fit = extract_populations(values, calibration.shape, **kwargs)
    error = 1.0 - fit.population(QuantumLevel.G)

    error_ci = None
    if n_resamples > 0:
        if rng is None:
            raise ValueError("bootstrap confidence intervals need an rng")
        _, low, high = bootstrap_population(
            values, calibration.shape, rng, QuantumLevel.G, n_resamples, **kwargs
        )
        error_ci = (1.0 - high, 1.0 - low)

    cycles = np.array([ep.n_cycles for ep in episodes], dtype=float)
    actions = np.concatenate([np.array(ep.actions, dtype=int) for ep in episodes])
    frequencies = {
        a.name.lower(): float(np.mean(actions == int(a))) for a in list(Action)[:n_actions]
    }
    latent = np.array([ep.final_level != QuantumLevel.G for ep in episodes])
    return ValidationMetrics(
        n_episodes=len(episodes),
        error=float(error),
        mean_cycles=float(cycles.mean()),
        std_cycles=float(cycles.std()),
        forced_fraction=float(np.mean([ep.forced_termination for ep in episodes])),
        action_frequencies=frequencies,
        rethermalization_floor=rethermalization_floor,
        latent_error=float(latent.mean()),
        populations=[float(p) for p in fit.populations],
        error_ci=error_ci,
    )


def evaluate_policy(
    env: QubitEnvironment,
    policy: DecisionCallback,
    calibration: ReadoutCalibration,
    n_episodes: int,
    prep: InitialStatePrep,
    rng: Optional[np.random.Generator] = None,
    n_resamples: int = 0,
    max_cycles: Optional[int] = None,
) -> ValidationMetrics:
    episodes = run_validation_episodes(env, policy, n_episodes, prep, max_cycles)
    metrics = summarize_episodes(
        episodes, calibration, env.cfg.rethermalization_floor, rng, n_resamples,
        n_actions=env.n_actions,
    )
    logger.info(
        "Validation (%s, %d episodes): 1-P_g = %.4f, <n> = %.3f, forced = %.3f",
        InitialStatePrep(prep).value, n_episodes, metrics.error, metrics.mean_cycles,
        metrics.forced_fraction,
    )
    return metrics
