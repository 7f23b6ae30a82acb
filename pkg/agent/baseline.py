"""Threshold strategies used as the reference the learned agent is compared with."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from core.config import ConfigValidationError
from core.envsim import QubitEnvironment
from core.models.quantum import Action, History, InitialStatePrep, QuantumLevel, Trace
from core.models.readout import MixtureFit
from core.readout import ReadoutCalibration, classify

from .evaluation import ValidationMetrics, evaluate_policy

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ThresholdPolicy:
    """Terminate below `accept_threshold`, flip above `discriminate_threshold`, else idle.

    With a 2-D `region_shape` the maximum-likelihood f region of the (U, W)
    plane maps to GfFlip (four actions) or Idle (three actions); the U
    thresholds decide everywhere else.
    """

    accept_threshold: float
    discriminate_threshold: float
    region_shape: Optional[MixtureFit] = None
    n_actions: int = 3

    def __post_init__(self):
        if self.accept_threshold > self.discriminate_threshold:
            raise ConfigValidationError(
                f"accept threshold {self.accept_threshold} exceeds "
                f"discriminate threshold {self.discriminate_threshold}",
                field="baseline.accept_threshold",
            )
        if self.region_shape is not None and self.region_shape.ndim != 2:
            raise ConfigValidationError(
                "the qutrit region map needs a 2-D mixture", field="baseline.region_shape"
            )


def threshold_decide(u: float, tp: ThresholdPolicy, w: Optional[float] = None) -> Action:
    if tp.region_shape is not None and w is not None:
        if classify(u, tp.region_shape, w) == QuantumLevel.F:
            return Action.GF_FLIP if tp.n_actions == 4 else Action.IDLE
    if u < tp.accept_threshold:
        return Action.TERMINATE
    if u > tp.discriminate_threshold:
        return Action.FLIP
    return Action.IDLE


def default_threshold_policy(
    calibration: ReadoutCalibration,
    n_actions: int = 3,
    accept_threshold: Optional[float] = None,
    discriminate_threshold: Optional[float] = None,
) -> ThresholdPolicy:
    """Both thresholds at the g/e midpoint unless given."""
    mid = calibration.threshold
    accept = mid if accept_threshold is None else accept_threshold
    discriminate = mid if discriminate_threshold is None else discriminate_threshold
    return ThresholdPolicy(
        accept,
        max(accept, discriminate),
        calibration.shape if calibration.ndim == 2 else None,
        n_actions,
    )


class ThresholdAgent:
    """Decision callback applying a ThresholdPolicy to calibrated signals."""

    def __init__(self, tp: ThresholdPolicy, calibration: ReadoutCalibration):
        self.tp = tp
        self.calibration = calibration

    def decide(self, trace: Trace) -> Action:
        value = self.calibration.project(trace)
        if self.calibration.ndim == 1:
            return threshold_decide(value, self.tp)
        return threshold_decide(float(value[0]), self.tp, float(value[1]))

    def probabilities(self, trace: Trace, history: History) -> np.ndarray:
        probs = np.zeros(self.tp.n_actions)
        probs[int(self.decide(trace))] = 1.0
        return probs

    def __call__(self, trace: Trace, history: History) -> Action:
        return self.decide(trace)


@dataclass
class ThresholdFrontierPoint:
    accept_threshold: float
    discriminate_threshold: float
    metrics: ValidationMetrics

    def to_dict(self) -> dict:
        return {
            "accept_threshold": self.accept_threshold,
            "discriminate_threshold": self.discriminate_threshold,
            **self.metrics.to_dict(),
        }


def accept_threshold_grid(calibration: ReadoutCalibration, n_points: int = 9, width: float = 3.0) -> np.ndarray:
    """Acceptance thresholds from `width`/2 noise widths below U_g up to the g/e midpoint."""
    lo = calibration.u_g - 0.5 * width * calibration.sigma_u
    return np.linspace(lo, calibration.threshold, n_points)


def threshold_frontier(
    env: QubitEnvironment,
    calibration: ReadoutCalibration,
    accept_thresholds: Sequence[float],
    prep: InitialStatePrep,
    n_episodes: int,
    discriminate_threshold: Optional[float] = None,
) -> list[ThresholdFrontierPoint]:
    """Error vs cycle count while sweeping the acceptance threshold."""
    points = []
    for accept in sorted(accept_thresholds):
        tp = default_threshold_policy(calibration, env.n_actions, accept, discriminate_threshold)
        metrics = evaluate_policy(env, ThresholdAgent(tp, calibration), calibration, n_episodes, prep)
        points.append(ThresholdFrontierPoint(tp.accept_threshold, tp.discriminate_threshold, metrics))
        logger.info(
            "threshold %.4f: 1-P_g = %.4f, <n> = %.3f", accept, metrics.error, metrics.mean_cycles
        )
    return points
