"""Mean readout traces and the noise level that calibrates them to a target SNR."""

import csv
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import norm

from core.models.config import EnvConfig
from core.models.quantum import MeasurementStrength, QuantumLevel

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["t", "I_g", "Q_g", "I_e", "Q_e", "I_f", "Q_f"]


class MeanTraceError(Exception):
    """Raised when tabulated mean traces cannot serve a request."""

    pass


def weak_snr(cfg: EnvConfig) -> float:
    """Weak-readout SNR.

    For equal-variance Gaussians the overlap integral is 2*Phi(-SNR/2), which
    is also the sum of the two misassignment tails.
    """
    if cfg.weak.snr is not None:
        return float(cfg.weak.snr)
    return float(2.0 * norm.isf(cfg.weak.overlap / 2.0))


def exponential_mean_traces(cfg: EnvConfig, n_samples: int) -> np.ndarray:
    """Resonator ring-up toward each level's steady IQ point.

    Returns shape (3, n_samples, 2); index 0/1/2 = G/E/F.
    """
    t = np.arange(n_samples) / cfg.sample_rate
    envelope = 1.0 - np.exp(-t / cfg.ring_up_time)
    steady = np.array([cfg.steady_g, cfg.steady_e, cfg.steady_f], dtype=float)
    return envelope[None, :, None] * steady[:, None, :]


def load_mean_traces_csv(path: str | Path) -> np.ndarray:
    """Read tabulated traces (columns t, I_g, Q_g, I_e, Q_e[, I_f, Q_f])."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        columns = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS[:5] if c not in columns]
        if missing:
            raise MeanTraceError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise MeanTraceError(f"{path}: no samples")

    has_f = "I_f" in columns and "Q_f" in columns
    traces = np.zeros((3 if has_f else 2, len(rows), 2))
    for k, row in enumerate(rows):
        traces[0, k] = float(row["I_g"]), float(row["Q_g"])
        traces[1, k] = float(row["I_e"]), float(row["Q_e"])
        if has_f:
            traces[2, k] = float(row["I_f"]), float(row["Q_f"])
    logger.info("Loaded %d-sample mean traces for %d levels from %s", len(rows), len(traces), path)
    return traces


def save_mean_traces_csv(path: str | Path, traces: np.ndarray, sample_rate: float) -> None:
    n_levels = traces.shape[0]
    columns = CSV_COLUMNS[: 1 + 2 * n_levels]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for k in range(traces.shape[1]):
            row = [k / sample_rate]
            for level in range(n_levels):
                row.extend(traces[level, k])
            writer.writerow(row)


class MeanTraceModel:
    """Per-level expected traces plus the per-sample noise level.

    The noise sigma is a per-sample property fixed at the configured readout
    length: sigma = ||<s_e> - <s_g>|| / SNR, so the matched-filter SNR of a
    jump-free full-length trace equals the configured SNR. Longer acquisitions
    keep the same sigma.
    """

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self._tabulated: Optional[np.ndarray] = (
            np.asarray(cfg.mean_traces, dtype=float) if cfg.mean_traces is not None else None
        )
        reference = self.mean_traces(cfg.readout_len)
        self.difference_norm = float(
            np.linalg.norm(reference[QuantumLevel.E] - reference[QuantumLevel.G])
        )
        self._sigma = {
            MeasurementStrength.STRONG: self.difference_norm / cfg.snr,
            MeasurementStrength.WEAK: self.difference_norm / weak_snr(cfg),
        }

    @property
    def tabulated(self) -> bool:
        return self._tabulated is not None

    def mean_traces(self, n_samples: Optional[int] = None) -> np.ndarray:
        n = n_samples or self.cfg.readout_len
        if self._tabulated is None:
            return exponential_mean_traces(self.cfg, n)
        if n > self._tabulated.shape[1]:
            raise MeanTraceError(
                f"tabulated mean traces hold {self._tabulated.shape[1]} samples, {n} requested"
            )
        return self._tabulated[:, :n]

    def mean_trace(self, level: QuantumLevel, n_samples: Optional[int] = None) -> np.ndarray:
        return self.mean_traces(n_samples)[level]

    def noise_sigma(self, strength: MeasurementStrength) -> float:
        return self._sigma[MeasurementStrength(strength)]
