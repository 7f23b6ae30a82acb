import logging
from typing import Optional

import numpy as np

from core.models.quantum import QuantumLevel

logger = logging.getLogger(__name__)


class EmptyClassError(ValueError):
    """Raised when a prepared level has no shots."""

    pass


def assignment_matrix(
    assigned: np.ndarray, prepared: np.ndarray, n_levels: Optional[int] = None
) -> np.ndarray:
    """M[i, j] = P(assigned i | prepared j)."""
    assigned = np.asarray(assigned, dtype=int)
    prepared = np.asarray(prepared, dtype=int)
    if assigned.shape != prepared.shape:
        raise ValueError("assignments and preparations differ in length")
    if n_levels is None:
        n_levels = 3 if np.any(prepared == QuantumLevel.F) else 2
    matrix = np.zeros((n_levels, n_levels))
    for j in range(n_levels):
        shots = assigned[prepared == j]
        if len(shots) == 0:
            raise EmptyClassError(f"no shots prepared in {QuantumLevel(j).name}")
        for i in range(n_levels):
            matrix[i, j] = np.mean(shots == i)
    return matrix


def readout_infidelity(
    assigned: np.ndarray, prepared: np.ndarray, n_levels: Optional[int] = None
) -> float:
    """1 - F. Two levels: (P(g|e) + P(e|g)) / 2. Three levels: 1 - mean diagonal."""
    matrix = assignment_matrix(assigned, prepared, n_levels)
    if len(matrix) == 2:
        return float(0.5 * (matrix[0, 1] + matrix[1, 0]))
    return float(1.0 - np.mean(np.diag(matrix)))
