"""Error vs cycle-count frontiers: a lambda sweep of trained agents and the threshold baseline."""

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from agent.baseline import accept_threshold_grid, threshold_frontier
from core.models.config import GlobalConfig

from ..models import FrontierPoint
from ..run_store import run_dir_name, write_csv
from ..workers import map_tasks, shutdown_worker_pool, spawn_seeds
from .common import calibrate, make_env, prep_of
from .train_service import plan_training, run_training

logger = logging.getLogger(__name__)

FRONTIER_FIELDS = list(FrontierPoint.model_fields)


def run_lambda_point(cfg: GlobalConfig, seed: int, out: str, lambda_penalty: float) -> FrontierPoint:
    record = run_training(cfg, seed, out, lambda_penalty)
    metrics = record.metrics
    low, high = metrics.error_ci if metrics.error_ci else (None, None)
    return FrontierPoint(
        source="agent",
        parameter=lambda_penalty,
        mean_cycles=metrics.mean_cycles,
        error=metrics.error,
        error_low=low,
        error_high=high,
        seed=seed,
    )


def baseline_points(cfg: GlobalConfig, seed: int, n_points: int = 9) -> list[FrontierPoint]:
    """Threshold policy frontier over a grid of acceptance thresholds."""
    cal_rng, env_rng = np.random.default_rng(seed).spawn(2)
    calibration = calibrate(cfg, cal_rng)
    points = threshold_frontier(
        make_env(cfg, env_rng),
        calibration,
        accept_threshold_grid(calibration, n_points),
        prep_of(cfg),
        cfg.experiment.validation_size,
    )
    return [
        FrontierPoint(
            source="threshold",
            parameter=p.accept_threshold,
            mean_cycles=p.metrics.mean_cycles,
            error=p.metrics.error,
            seed=seed,
        )
        for p in points
    ]


def sweep_lambda(
    cfg: GlobalConfig,
    seed: int,
    out: str | Path,
    lambdas: Optional[Sequence[float]] = None,
    workers: int = 1,
    baseline: bool = True,
) -> tuple[Path, list[FrontierPoint]]:
    """Train one agent per lambda, each on its own child seed, and write frontier.csv."""
    lambdas = list(lambdas if lambdas is not None else cfg.experiment.lambdas)
    for lam in lambdas:
        plan_training(cfg, lam)
    seeds = [int(s.generate_state(1)[0]) for s in spawn_seeds(seed, len(lambdas))]
    tasks = [(cfg, s, str(out), lam) for s, lam in zip(seeds, lambdas)]
    logger.info("Sweeping %d lambda values with %d workers", len(tasks), workers)
    try:
        points = map_tasks(run_lambda_point, tasks, workers)
    finally:
        shutdown_worker_pool()
    if baseline:
        points.extend(baseline_points(cfg, seed))

    path = Path(out) / run_dir_name(cfg, seed, "sweep") / "frontier.csv"
    write_csv(path, [p.to_dict() for p in points], FRONTIER_FIELDS)
    logger.info("Frontier with %d points written to %s", len(points), path)
    return path, points
