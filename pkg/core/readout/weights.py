"""Matched-filter integration weights and signal integration."""

import logging
from typing import Sequence

import numpy as np

from core.models.quantum import Trace
from core.models.readout import FilterWeights

logger = logging.getLogger(__name__)

_DEGENERATE_RTOL = 1e-12


class DegenerateWeightsError(ValueError):
    """Raised when the mean traces carry no contrast to build weights from."""

    pass


class LengthMismatchError(ValueError):
    """Raised when traces and weights disagree in length."""

    pass


def mean_signal(traces: Sequence[Trace]) -> np.ndarray:
    """Ensemble mean of the concatenated [I, Q] vectors."""
    if len(traces) == 0:
        raise ValueError("trace ensemble is empty")
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise LengthMismatchError(f"traces have differing lengths {sorted(lengths)}")
    return np.mean([t.concatenated() for t in traces], axis=0)


def weights_from_means(mean_g: np.ndarray, mean_e: np.ndarray) -> FilterWeights:
    """U weights along <s_e> - <s_g>, unit norm, with |U_e - U_g| = 1."""
    mean_g = np.asarray(mean_g, dtype=float).ravel(order="F")
    mean_e = np.asarray(mean_e, dtype=float).ravel(order="F")
    if mean_g.shape != mean_e.shape:
        raise LengthMismatchError(f"mean traces differ in length: {mean_g.shape} vs {mean_e.shape}")
    diff = mean_e - mean_g
    norm = float(np.linalg.norm(diff))
    scale = max(np.linalg.norm(mean_g), np.linalg.norm(mean_e), 1.0)
    if norm <= _DEGENERATE_RTOL * scale:
        raise DegenerateWeightsError("g and e mean traces are indistinguishable")
    return FilterWeights(diff / norm, "U", norm)


def estimate_weights(traces_g: Sequence[Trace], traces_e: Sequence[Trace]) -> FilterWeights:
    mean_g, mean_e = mean_signal(traces_g), mean_signal(traces_e)
    if mean_g.shape != mean_e.shape:
        raise LengthMismatchError(
            f"g traces have {len(mean_g) // 2} samples, e traces {len(mean_e) // 2}"
        )
    return weights_from_means(mean_g, mean_e)


def orthonormal_pair_from_means(
    mean_g: np.ndarray, mean_e: np.ndarray, mean_f: np.ndarray
) -> tuple[FilterWeights, FilterWeights]:
    """U along the g/e contrast and W along the part of the g/f contrast orthogonal to it.

    Both weight vectors are unit norm and orthogonal; W shares U's
    normalization so both axes are in the same units.
    """
    w_u = weights_from_means(mean_g, mean_e)
    mean_g = np.asarray(mean_g, dtype=float).ravel(order="F")
    mean_f = np.asarray(mean_f, dtype=float).ravel(order="F")
    diff_f = mean_f - mean_g
    ortho = diff_f - (diff_f @ w_u.w) * w_u.w
    norm = float(np.linalg.norm(ortho))
    if norm <= _DEGENERATE_RTOL * max(np.linalg.norm(diff_f), 1.0):
        raise DegenerateWeightsError("f contrast lies entirely along the g/e axis")
    return w_u, FilterWeights(ortho / norm, "W", w_u.normalization)


def estimate_orthonormal_pair(
    traces_g: Sequence[Trace], traces_e: Sequence[Trace], traces_f: Sequence[Trace]
) -> tuple[FilterWeights, FilterWeights]:
    return orthonormal_pair_from_means(
        mean_signal(traces_g), mean_signal(traces_e), mean_signal(traces_f)
    )


def integrate(trace: Trace, w: FilterWeights) -> float:
    s = trace.concatenated()
    if len(s) != len(w.w):
        raise LengthMismatchError(f"trace has {len(trace)} samples, weights {w.n_samples}")
    return float(w.w @ s / w.normalization)


def integrate_many(traces: Sequence[Trace], w: FilterWeights) -> np.ndarray:
    if len(traces) == 0:
        return np.zeros(0)
    if any(2 * len(t) != len(w.w) for t in traces):
        raise LengthMismatchError(f"traces do not all have {w.n_samples} samples")
    signals = np.stack([t.concatenated() for t in traces])
    return signals @ w.w / w.normalization
