"""Readout calibration and population extraction.

A calibration pass simulates heralded g/e(/f) ensembles, builds the
integration weights, and fits one mixture shape to all of them. That shape
supplies the reference values U_g and U_e for the reward, the thresholds for
the baseline, and the fixed means/covariances for population extraction.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from core import constants
from core.envsim import QubitEnvironment
from core.models.config import ReadoutConfig, RewardConfig
from core.models.quantum import InitialStatePrep, MeasurementStrength, QuantumLevel, Trace
from core.models.readout import FilterWeights, Histogram, MixtureFit

from .fidelity import assignment_matrix, readout_infidelity
from .histogram import histogram_for, same_binning
from .mixture import classify_array, fit_amplitudes, fit_mixture
from .weights import (
    estimate_orthonormal_pair,
    estimate_weights,
    integrate_many,
)

logger = logging.getLogger(__name__)

_HERALDED_PREPS = (
    InitialStatePrep.GROUND,
    InitialStatePrep.EXCITED,
    InitialStatePrep.SECOND_EXCITED,
)


def project_values(
    traces: Sequence[Trace], weights_u: FilterWeights, weights_w: Optional[FilterWeights] = None
) -> np.ndarray:
    """Integrated signals, shape (n,) or (n, 2) when a W axis exists."""
    u = integrate_many(traces, weights_u)
    if weights_w is None:
        return u
    return np.stack([u, integrate_many(traces, weights_w)], axis=1)


@dataclass
class ReadoutCalibration:
    strength: MeasurementStrength
    weights_u: FilterWeights
    shape: MixtureFit
    assignment: np.ndarray
    infidelity: float
    weights_w: Optional[FilterWeights] = None

    @property
    def ndim(self) -> int:
        return 1 if self.weights_w is None else 2

    @property
    def u_g(self) -> float:
        return float(np.ravel(self.shape.mean(QuantumLevel.G))[0])

    @property
    def u_e(self) -> float:
        return float(np.ravel(self.shape.mean(QuantumLevel.E))[0])

    @property
    def threshold(self) -> float:
        """g/e decision boundary on the U axis."""
        return 0.5 * (self.u_g + self.u_e)

    @property
    def sigma_u(self) -> float:
        if self.ndim == 1:
            return float(self.shape.sigmas.mean())
        return float(np.sqrt(self.shape.covariances[:, 0, 0]).mean())

    @property
    def sigma_w(self) -> Optional[float]:
        if self.ndim == 1:
            return None
        return float(np.sqrt(self.shape.covariances[:, 1, 1]).mean())

    def project(self, trace: Trace):
        """U (1-D) or (U, W) of one trace."""
        values = self.project_many([trace])
        return float(values[0]) if self.ndim == 1 else values[0]

    def project_many(self, traces: Sequence[Trace]) -> np.ndarray:
        return project_values(traces, self.weights_u, self.weights_w)

    def classify(self, traces: Sequence[Trace]) -> np.ndarray:
        return classify_array(self.project_many(traces), self.shape)

    def reward_config(self, lambda_penalty: float) -> RewardConfig:
        """Reward references frozen from this calibration."""
        return RewardConfig(lambda_penalty=lambda_penalty, u_g=self.u_g, u_e=self.u_e)

    def to_dict(self) -> dict:
        return {
            "strength": self.strength.value,
            "weights_u": self.weights_u.to_dict(),
            "weights_w": self.weights_w.to_dict() if self.weights_w is not None else None,
            "shape": self.shape.to_dict(),
            "assignment": self.assignment.tolist(),
            "infidelity": self.infidelity,
            "u_g": self.u_g,
            "u_e": self.u_e,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReadoutCalibration":
        weights_w = data.get("weights_w")
        return cls(
            strength=MeasurementStrength(data["strength"]),
            weights_u=FilterWeights.from_dict(data["weights_u"]),
            shape=MixtureFit.from_dict(data["shape"]),
            assignment=np.asarray(data["assignment"], dtype=float),
            infidelity=float(data["infidelity"]),
            weights_w=FilterWeights.from_dict(weights_w) if weights_w else None,
        )


def calibrate_readout(
    env: QubitEnvironment,
    readout_cfg: Optional[ReadoutConfig] = None,
    strength: Optional[MeasurementStrength] = None,
) -> ReadoutCalibration:
    readout_cfg = readout_cfg or ReadoutConfig()
    strength = MeasurementStrength(strength or env.strength)
    levels = env.cfg.levels
    shots = readout_cfg.calibration_shots

    ensembles = [
        env.sample_traces(prep, shots, strength) for prep in _HERALDED_PREPS[:levels]
    ]
    if levels == 3:
        weights_u, weights_w = estimate_orthonormal_pair(*ensembles)
    else:
        weights_u, weights_w = estimate_weights(*ensembles), None

    values = [project_values(traces, weights_u, weights_w) for traces in ensembles]
    combined = np.concatenate(values)
    hist = histogram_for(combined, min_bins=readout_cfg.min_bins)
    shape = fit_mixture(
        hist,
        levels,
        equal_variance=strength == MeasurementStrength.WEAK,
        max_iter=readout_cfg.max_iter,
        tol=readout_cfg.tol,
    )

    assigned = np.concatenate([classify_array(v, shape) for v in values])
    prepared = np.concatenate([np.full(len(v), level) for level, v in enumerate(values)])
    matrix = assignment_matrix(assigned, prepared, levels)
    infidelity = readout_infidelity(assigned, prepared, levels)
    logger.info(
        "Readout calibration (%s, %d levels, %d shots/level): 1-F = %.4f",
        strength.value, levels, shots, infidelity,
    )
    return ReadoutCalibration(strength, weights_u, shape, matrix, infidelity, weights_w)


def extract_populations(
    values: np.ndarray,
    shape: MixtureFit,
    hist: Optional[Histogram] = None,
    min_bins: int = constants.MIN_HISTOGRAM_BINS,
) -> MixtureFit:
    """Populations as amplitude ratios of a fixed-shape fit, never by thresholding."""
    hist = hist if hist is not None else histogram_for(values, min_bins=min_bins)
    return fit_amplitudes(hist, shape)


def bootstrap_population(
    values: np.ndarray,
    shape: MixtureFit,
    rng: np.random.Generator,
    level: QuantumLevel = QuantumLevel.G,
    n_resamples: int = constants.BOOTSTRAP_RESAMPLES,
    confidence: float = 0.95,
    min_bins: int = constants.MIN_HISTOGRAM_BINS,
) -> tuple[float, float, float]:
    """(estimate, low, high) population of `level` with a percentile bootstrap CI."""
    values = np.asarray(values, dtype=float)
    hist = histogram_for(values, min_bins=min_bins)
    estimate = fit_amplitudes(hist, shape).population(level)
    samples = np.empty(n_resamples)
    for k in range(n_resamples):
        resampled = values[rng.integers(0, len(values), size=len(values))]
        samples[k] = fit_amplitudes(same_binning(hist, resampled), shape).population(level)
    alpha = 0.5 * (1.0 - confidence)
    low, high = np.quantile(samples, [alpha, 1.0 - alpha])
    return estimate, float(low), float(high)
