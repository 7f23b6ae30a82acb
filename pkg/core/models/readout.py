from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from core.models.quantum import QuantumLevel


@dataclass
class FilterWeights:
    """Unit-norm integration weights over the concatenated [I, Q] trace.

    `normalization` is the norm of the mean-trace difference, so integrated
    signals come out in units where |U_e - U_g| = 1.
    """

    w: np.ndarray
    label: Literal["U", "W"] = "U"
    normalization: float = 1.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if not np.all(np.isfinite(self.w)) or not np.isfinite(self.normalization):
            raise ValueError("filter weights must be finite")

    @property
    def n_samples(self) -> int:
        return len(self.w) // 2

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "label": self.label,
            "normalization": self.normalization,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FilterWeights":
        return cls(np.asarray(data["w"], dtype=float), data["label"], float(data["normalization"]))


@dataclass
class Histogram:
    """Binned counts; 1-D uses `edges`, 2-D uses `edges` and `edges_y`."""

    edges: np.ndarray
    counts: np.ndarray
    edges_y: Optional[np.ndarray] = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.edges_y is not None:
            self.edges_y = np.asarray(self.edges_y, dtype=float)
            expected = (len(self.edges) - 1, len(self.edges_y) - 1)
        else:
            expected = (len(self.edges) - 1,)
        if self.counts.shape != expected:
            raise ValueError(f"counts shape {self.counts.shape} does not match bins {expected}")
        if np.any(self.counts < 0):
            raise ValueError("histogram counts must be nonnegative")

    @property
    def ndim(self) -> int:
        return 1 if self.edges_y is None else 2

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def centers_y(self) -> np.ndarray:
        return 0.5 * (self.edges_y[:-1] + self.edges_y[1:])

    def to_dict(self) -> dict:
        data = {"edges": self.edges.tolist(), "counts": self.counts.tolist()}
        if self.edges_y is not None:
            data["edges_y"] = self.edges_y.tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Histogram":
        return cls(
            np.asarray(data["edges"], dtype=float),
            np.asarray(data["counts"], dtype=float),
            np.asarray(data["edges_y"], dtype=float) if "edges_y" in data else None,
        )


@dataclass
class MixtureFit:
    """Fitted bi-/tri-modal Gaussian mixture.

    1-D: `means` shape (k,), `covariances` holds variances, shape (k,).
    2-D: `means` shape (k, 2), `covariances` shape (k, 2, 2).
    Components are labelled by `levels` (G, E[, F]).
    """

    means: np.ndarray
    covariances: np.ndarray
    amplitudes: np.ndarray
    levels: list[QuantumLevel] = field(default_factory=list)
    log_likelihood: float = float("nan")
    iterations: int = 0
    converged: bool = True
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if not self.levels:
            self.levels = [QuantumLevel(i) for i in range(len(self.amplitudes))]
        if np.any(self.amplitudes < 0):
            raise ValueError("mixture amplitudes must be nonnegative")

    @property
    def n_components(self) -> int:
        return len(self.amplitudes)

    @property
    def ndim(self) -> int:
        return 1 if self.means.ndim == 1 else 2

    @property
    def sigmas(self) -> np.ndarray:
        """Per-component standard deviations (1-D only)."""
        return np.sqrt(self.covariances)

    @property
    def populations(self) -> np.ndarray:
        total = self.amplitudes.sum()
        if total <= 0:
            raise ValueError("mixture has zero total amplitude")
        return self.amplitudes / total

    def population(self, level: QuantumLevel) -> float:
        return float(self.populations[self.levels.index(level)])

    def mean(self, level: QuantumLevel):
        return self.means[self.levels.index(level)]

    @property
    def thresholds(self) -> list[float]:
        """Midpoints between adjacent means (1-D); 2-D uses likelihood regions."""
        if self.ndim != 1:
            return []
        ordered = np.sort(self.means)
        return [float(0.5 * (a + b)) for a, b in zip(ordered[:-1], ordered[1:])]

    def with_amplitudes(self, amplitudes: np.ndarray, **kwargs) -> "MixtureFit":
        return MixtureFit(
            self.means.copy(),
            self.covariances.copy(),
            np.asarray(amplitudes, dtype=float),
            list(self.levels),
            **kwargs,
        )

    def scaled(self, factor: float) -> "MixtureFit":
        """Same mixture with the signal axis scaled by `factor` > 0."""
        return MixtureFit(
            self.means * factor,
            self.covariances * factor**2,
            self.amplitudes.copy(),
            list(self.levels),
        )

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "amplitudes": self.amplitudes.tolist(),
            "levels": [lvl.name for lvl in self.levels],
            "thresholds": self.thresholds,
            "populations": self.populations.tolist(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureFit":
        return cls(
            np.asarray(data["means"], dtype=float),
            np.asarray(data["covariances"], dtype=float),
            np.asarray(data["amplitudes"], dtype=float),
            [QuantumLevel[name] for name in data["levels"]],
            float(data.get("log_likelihood", float("nan"))),
            int(data.get("iterations", 0)),
            bool(data.get("converged", True)),
        )
