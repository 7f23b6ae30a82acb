"""Empirical action probabilities binned over integrated readout signals."""

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from core import constants
from core.models.quantum import Action, Episode, History, QuantumLevel, Trace
from core.readout import ReadoutCalibration

logger = logging.getLogger(__name__)

ProbabilityCallback = Callable[[Trace, History], np.ndarray]


class MapAxes(str, Enum):
    U = "u"
    # current and previous cycle
    U_PREV = "u_prev"
    UW = "uw"


@dataclass
class PolicyMap:
    """Mean P(a) per bin. Bins nobody visited hold NaN and are marked in `empty`."""

    axes: MapAxes
    edges: list[np.ndarray]
    probabilities: np.ndarray
    counts: np.ndarray
    offsets: list[float] = field(default_factory=list)
    overlay: dict = field(default_factory=dict)
    outside: int = 0

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    @property
    def n_actions(self) -> int:
        return self.probabilities.shape[-1]

    @property
    def action_names(self) -> list[str]:
        return [Action(i).name.lower() for i in range(self.n_actions)]

    def to_dict(self) -> dict:
        return {
            "axes": self.axes.value,
            "edges": [e.tolist() for e in self.edges],
            # NaN is not valid JSON
            "probabilities": np.where(np.isnan(self.probabilities), None, self.probabilities).tolist(),
            "counts": self.counts.tolist(),
            "offsets": self.offsets,
            "overlay": self.overlay,
            "outside": self.outside,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyMap":
        probs = np.array(data["probabilities"], dtype=object)
        probs = np.where(probs == None, np.nan, probs).astype(float)  # noqa: E711
        return cls(
            MapAxes(data["axes"]),
            [np.asarray(e, dtype=float) for e in data["edges"]],
            probs,
            np.asarray(data["counts"], dtype=int),
            list(data.get("offsets", [])),
            dict(data.get("overlay", {})),
            int(data.get("outside", 0)),
        )

    def rows(self) -> list[dict]:
        """One row per bin: bin bounds, occupancy and P(a)."""
        names = ["x", "y"][: len(self.edges)]
        out = []
        for index in np.ndindex(*self.counts.shape):
            row = {}
            for name, edges, i in zip(names, self.edges, index):
                row[f"{name}_lo"] = float(edges[i])
                row[f"{name}_hi"] = float(edges[i + 1])
            row["count"] = int(self.counts[index])
            for action, p in zip(self.action_names, self.probabilities[index]):
                row[f"p_{action}"] = "" if np.isnan(p) else float(p)
            out.append(row)
        return out

    def save(self, directory: str | Path, stem: str = "policy_map") -> tuple[Path, Path]:
        """CSV grid plus JSON metadata for external plotting."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{stem}.csv"
        rows = self.rows()
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        json_path = directory / f"{stem}.json"
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return csv_path, json_path


def _axis_ranges(calibration: ReadoutCalibration, axes: MapAxes, width: float) -> list[tuple[float, float]]:
    shape = calibration.shape
    u = shape.means[:, 0] if shape.ndim == 2 else shape.means
    u_range = (u.min() - width * calibration.sigma_u, u.max() + width * calibration.sigma_u)
    if axes == MapAxes.U:
        return [u_range]
    if axes == MapAxes.U_PREV:
        return [u_range, u_range]
    w = shape.means[:, 1]
    return [u_range, (w.min() - width * calibration.sigma_w, w.max() + width * calibration.sigma_w)]


def _axis_offsets(calibration: ReadoutCalibration, axes: MapAxes) -> list[float]:
    """Shifts that put the decision boundaries at 0."""
    u0 = calibration.threshold
    if axes == MapAxes.U:
        return [u0]
    if axes == MapAxes.U_PREV:
        return [u0, u0]
    shape = calibration.shape
    w_e = shape.mean(QuantumLevel.E)[1]
    w_f = shape.mean(QuantumLevel.F)[1]
    return [u0, float(0.5 * (w_e + w_f))]


def _overlay(calibration: ReadoutCalibration, offsets: list[float]) -> dict:
    shape = calibration.shape
    components = []
    for j, level in enumerate(shape.levels):
        if shape.ndim == 1:
            mean = [float(shape.means[j]) - offsets[0]]
            cov = [[float(shape.covariances[j])]]
        else:
            mean = [float(m) - o for m, o in zip(shape.means[j], offsets)]
            cov = shape.covariances[j].tolist()
        components.append({"level": level.name, "mean": mean, "covariance": cov})
    return {"components": components}


def build_policy_map(
    policy: ProbabilityCallback,
    episodes: Sequence[Episode],
    calibration: ReadoutCalibration,
    axes: MapAxes = MapAxes.U,
    bins: int = constants.POLICY_MAP_BINS,
    width: float = 4.0,
    center: bool = False,
) -> PolicyMap:
    """Replay the probe episodes through `policy` and average P(a) per bin.

    The grid spans the fitted means +- `width` noise widths. With `center`
    the axes are shifted so the g/e threshold (and on W the e/f midpoint)
    sits at 0; the shifts are kept in `offsets`.
    """
    axes = MapAxes(axes)
    if not episodes or not any(ep.observations for ep in episodes):
        raise ValueError("probe set is empty")
    if axes == MapAxes.UW and calibration.ndim != 2:
        raise ValueError("a (U, W) map needs a two-axis calibration")

    coords, probs = [], []
    for ep in episodes:
        signals = calibration.project_many(ep.observations)
        for t, trace in enumerate(ep.observations):
            history = tuple(zip(ep.observations[:t], ep.actions[:t]))
            u_t = signals[t] if calibration.ndim == 1 else signals[t][0]
            if axes == MapAxes.U:
                point = [u_t]
            elif axes == MapAxes.U_PREV:
                if t == 0:
                    continue
                u_prev = signals[t - 1] if calibration.ndim == 1 else signals[t - 1][0]
                point = [u_t, u_prev]
            else:
                point = [signals[t][0], signals[t][1]]
            coords.append(point)
            probs.append(np.asarray(policy(trace, history), dtype=float))
    if not coords:
        raise ValueError("probe set has no cycles for these axes")

    coords = np.asarray(coords, dtype=float)
    probs = np.stack(probs)
    offsets = _axis_offsets(calibration, axes) if center else [0.0] * coords.shape[1]
    ranges = [(lo - o, hi - o) for (lo, hi), o in zip(_axis_ranges(calibration, axes, width), offsets)]
    coords = coords - np.asarray(offsets)
    edges = [np.linspace(lo, hi, bins + 1) for lo, hi in ranges]

    index = np.stack(
        [np.searchsorted(e, coords[:, d], side="right") - 1 for d, e in enumerate(edges)], axis=1
    )
    inside = np.all((index >= 0) & (index < bins), axis=1)
    grid = (bins,) * len(edges)
    counts = np.zeros(grid, dtype=int)
    sums = np.zeros(grid + (probs.shape[1],))
    idx = tuple(index[inside].T)
    np.add.at(counts, idx, 1)
    np.add.at(sums, idx, probs[inside])

    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sums / counts[..., None]
    mean[counts == 0] = np.nan
    outside = int(np.sum(~inside))
    if outside:
        logger.debug("%d probe cycles fall outside the policy map grid", outside)
    return PolicyMap(axes, edges, mean, counts, list(offsets), _overlay(calibration, offsets), outside)
