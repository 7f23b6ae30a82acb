"""Trace simulation and readout calibration as standalone commands."""

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from agent.discriminator import save_labeled_set, simulate_labeled_set
from core.envsim import MeanTraceModel, save_mean_traces_csv
from core.models.config import GlobalConfig
from core.readout import ReadoutCalibration, overlap, snr

from ..run_store import write_json
from .common import calibrate, make_env, strength_of

logger = logging.getLogger(__name__)


def simulate_traces(
    cfg: GlobalConfig,
    seed: int,
    out: str | Path,
    n_traces: int = 0,
    duration: Optional[float] = None,
) -> list[Path]:
    """Mean traces of every level, and optionally `n_traces` labelled g/e single shots."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    model = MeanTraceModel(cfg.env)
    mean_path = out / "mean_traces.csv"
    save_mean_traces_csv(mean_path, model.mean_traces(), cfg.env.sample_rate)
    written = [mean_path]
    if n_traces > 0:
        env = make_env(cfg, np.random.default_rng(seed))
        dataset = simulate_labeled_set(
            env, n_traces, duration or cfg.env.readout_duration, cfg.discrimination.heralded
        )
        written.append(save_labeled_set(out / "traces.csv", dataset))
    logger.info("Wrote %s", ", ".join(str(p) for p in written))
    return written


def calibration_summary(calibration: ReadoutCalibration) -> dict:
    summary = {
        "strength": calibration.strength.value,
        "levels": [level.name for level in calibration.shape.levels],
        "infidelity": calibration.infidelity,
        "u_g": calibration.u_g,
        "u_e": calibration.u_e,
        "threshold": calibration.threshold,
        "sigma_u": calibration.sigma_u,
        "assignment": calibration.assignment.tolist(),
    }
    if calibration.ndim == 1:
        summary["snr"] = snr(calibration.shape)
        summary["overlap"] = overlap(calibration.shape)
    return summary


def fit_readout(cfg: GlobalConfig, seed: int, out: str | Path) -> tuple[ReadoutCalibration, dict]:
    """Calibrate on heralded ensembles and write calibration.json."""
    calibration = calibrate(cfg, np.random.default_rng(seed))
    summary = calibration_summary(calibration)
    write_json(Path(out) / "calibration.json", {**calibration.to_dict(), "summary": summary})
    logger.info(
        "%s readout: 1-F = %.4f over %d levels", strength_of(cfg).value,
        calibration.infidelity, len(summary["levels"]),
    )
    return calibration, summary
