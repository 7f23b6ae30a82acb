"""Discrimination curves: network vs matched filter over observation times."""

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from agent.discriminator import (
    DiscriminationCurve,
    LabeledTraceSet,
    discrimination_curve,
    load_labeled_set,
    save_labeled_set,
    simulate_labeled_set,
)
from core.models.config import GlobalConfig

from ..exception import RunError
from ..run_store import create_run_dir
from .common import make_env

logger = logging.getLogger(__name__)


def labeled_traces(
    cfg: GlobalConfig, rng: np.random.Generator, traces_csv: Optional[str | Path] = None
) -> LabeledTraceSet:
    dc = cfg.discrimination
    if traces_csv is not None:
        dataset = load_labeled_set(traces_csv, dc.heralded)
        logger.info("Loaded %d labelled traces from %s", len(dataset), traces_csv)
        return dataset
    if cfg.env.levels != 2:
        raise RunError("discrimination runs on a two-level system")
    return simulate_labeled_set(make_env(cfg, rng), dc.n_traces, dc.trace_duration, dc.heralded)


def run_discrimination(
    cfg: GlobalConfig,
    seed: int,
    out: str | Path,
    traces_csv: Optional[str | Path] = None,
    save_traces: bool = False,
) -> tuple[Path, DiscriminationCurve]:
    """Writes discrimination.csv into the run directory.

    Traces read from CSV have no latent path, so all their matched-filter
    errors count as overlap.
    """
    data_rng, train_rng = np.random.default_rng(seed).spawn(2)
    run_dir = create_run_dir(out, cfg, seed)
    dataset = labeled_traces(cfg, data_rng, traces_csv)
    if save_traces and traces_csv is None:
        save_labeled_set(run_dir / "traces.csv", dataset)
    taus = [t for t in cfg.discrimination.taus if t <= dataset.duration + 0.5 / dataset.sample_rate]
    if len(taus) < len(cfg.discrimination.taus):
        logger.warning("Dropped %d observation times beyond the %.2e s traces",
                       len(cfg.discrimination.taus) - len(taus), dataset.duration)
    if not taus:
        raise RunError(f"no observation time fits in the {dataset.duration} s traces")
    curve = discrimination_curve(dataset, cfg.network, taus, cfg.discrimination, cfg.ppo, train_rng)
    path = curve.save_csv(run_dir / "discrimination.csv")
    logger.info("Discrimination curve over %d observation times written to %s", len(taus), path)
    return path, curve
