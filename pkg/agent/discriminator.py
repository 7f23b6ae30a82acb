"""Supervised state discrimination with the streaming network.

The network is trained with cross-entropy on labelled g/e traces cut to an
observation time tau and compared with the matched-filter classifier at
every tau. Simulated traces carry their latent path, so every matched-filter
error can be attributed to Gaussian overlap, a decay during the window, or
a wrong preparation.
"""

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from core.envsim import QubitEnvironment
from core.models.config import DiscriminationConfig, NetTopology, PpoHyperparams
from core.models.quantum import InitialStatePrep, Trace
from core.models.readout import FilterWeights
from core.readout import estimate_weights, integrate_many, readout_infidelity

from .network import LowLatencyPolicy, PolicyParams, build_window, encode_observations

logger = logging.getLogger(__name__)

_PREPS = {
    True: (InitialStatePrep.GROUND, InitialStatePrep.EXCITED),
    False: (InitialStatePrep.EQUILIBRIUM, InitialStatePrep.INVERTED),
}


@dataclass
class LabeledTraceSet:
    """Traces labelled with the prepared level (0 = g, 1 = e).

    `train()` takes even indices and `validation()` odd ones, so the two
    splits are interleaved and never share a trace.
    """

    traces: list[Trace]
    labels: np.ndarray
    sample_rate: float
    heralded: bool = True
    split: Optional[str] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.traces) != len(self.labels):
            raise ValueError("one label per trace is required")
        if not set(np.unique(self.labels)) <= {0, 1}:
            raise ValueError("labels must be 0 (g) or 1 (e)")
        if len({len(t) for t in self.traces}) > 1:
            raise ValueError("all traces must have the same length")

    def __len__(self) -> int:
        return len(self.traces)

    @property
    def n_samples(self) -> int:
        return len(self.traces[0]) if self.traces else 0

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def excited_fraction(self) -> float:
        return float(self.labels.mean())

    def _subset(self, indices: np.ndarray, split: str) -> "LabeledTraceSet":
        if self.split is not None:
            raise ValueError(f"set is already the {self.split} split")
        return LabeledTraceSet(
            [self.traces[i] for i in indices], self.labels[indices], self.sample_rate,
            self.heralded, split,
        )

    def train(self) -> "LabeledTraceSet":
        return self._subset(np.arange(0, len(self), 2), "train")

    def validation(self) -> "LabeledTraceSet":
        return self._subset(np.arange(1, len(self), 2), "validation")

    def truncated(self, n_samples: int) -> list[Trace]:
        return [t.truncate(n_samples, self.sample_rate) for t in self.traces]

    def with_label(self, label: int) -> list[Trace]:
        return [t for t, lab in zip(self.traces, self.labels) if lab == label]


def simulate_labeled_set(env: QubitEnvironment, n_traces: int, duration: float, heralded: bool = True) -> LabeledTraceSet:
    """Balanced g/e traces of length `duration`.

    Labels follow g, g, e, e, ... so both interleaved splits stay balanced.
    Without heralding the labels are the intended preparations from the
    thermal state, which are wrong with the thermal population.
    """
    n_samples = int(round(duration * env.cfg.sample_rate))
    labels = (np.arange(n_traces) // 2) % 2
    preps = _PREPS[heralded]
    traces = []
    for label in labels:
        state = env.prepare(preps[label])
        trace, _ = env.measure(state, n_samples=n_samples)
        traces.append(trace)
    return LabeledTraceSet(traces, labels, env.cfg.sample_rate, heralded)


def save_labeled_set(path: str | Path, dataset: LabeledTraceSet) -> Path:
    """Long-format CSV: trace, label, t, I, Q."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    t = np.arange(dataset.n_samples) / dataset.sample_rate
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["trace", "label", "t", "I", "Q"])
        for k, (trace, label) in enumerate(zip(dataset.traces, dataset.labels)):
            for j in range(len(trace)):
                writer.writerow(
                    [k, int(label), repr(float(t[j])), repr(float(trace.i_samples[j])),
                     repr(float(trace.q_samples[j]))]
                )
    return path


def load_labeled_set(path: str | Path, heralded: bool = True) -> LabeledTraceSet:
    """Inverse of `save_labeled_set`; latent paths are not stored."""
    rows: dict[int, dict] = {}
    with open(path, "r", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            entry = rows.setdefault(int(row["trace"]), {"label": int(row["label"]), "t": [], "i": [], "q": []})
            entry["t"].append(float(row["t"]))
            entry["i"].append(float(row["I"]))
            entry["q"].append(float(row["Q"]))
    if not rows:
        raise ValueError(f"{path} holds no traces")
    first = rows[min(rows)]
    sample_rate = 1.0 / (first["t"][1] - first["t"][0]) if len(first["t"]) > 1 else 1.0
    keys = sorted(rows)
    return LabeledTraceSet(
        [Trace(rows[k]["i"], rows[k]["q"]) for k in keys],
        [rows[k]["label"] for k in keys],
        sample_rate,
        heralded,
    )


def classifier_topology(base: NetTopology, n_samples: int) -> NetTopology:
    """Two-output, memoryless variant of `base` whose boxcar spreads n_samples over all layers."""
    blocks = base.n_stream_layers * base.samples_per_block
    return dataclasses.replace(
        base,
        n_actions=2,
        memory_depth=0,
        readout_len=n_samples,
        boxcar_width=max(1, math.ceil(n_samples / blocks)),
    )


def _features(traces: Sequence[Trace], topology: NetTopology) -> np.ndarray:
    return encode_observations([build_window(t, (), topology) for t in traces])


@dataclass
class DiscriminatorModel:
    params: PolicyParams
    scale: float
    n_samples: int
    train_loss: float
    converged: bool
    epochs: int
    loss_history: list[float] = field(default_factory=list)

    def probabilities(self, traces: Sequence[Trace], sample_rate: float) -> np.ndarray:
        cut = [t.truncate(self.n_samples, sample_rate) for t in traces]
        x = torch.as_tensor(_features(cut, self.params.topology) * self.scale, dtype=torch.float64)
        policy = LowLatencyPolicy.from_params(self.params)
        with torch.no_grad():
            return policy.probabilities(x).numpy()

    def classify(self, traces: Sequence[Trace], sample_rate: float) -> np.ndarray:
        return self.probabilities(traces, sample_rate).argmax(axis=1)


def train_classifier(
    dataset: LabeledTraceSet,
    topology: NetTopology,
    tau: float,
    cfg: DiscriminationConfig,
    hp: PpoHyperparams,
    rng: np.random.Generator,
) -> DiscriminatorModel:
    """Best of `cfg.restarts` cross-entropy fits on traces cut to `tau`.

    A restart that hits the epoch cap without reaching the plateau criterion
    is returned with `converged=False`.
    """
    n_samples = int(round(tau * dataset.sample_rate))
    if n_samples < 1 or n_samples > dataset.n_samples:
        raise ValueError(f"tau = {tau} s is outside the {dataset.duration} s traces")
    topo = classifier_topology(topology, n_samples)
    x_raw = _features(dataset.truncated(n_samples), topo)
    std = float(x_raw.std())
    scale = 1.0 / std if std > 0 else 1.0
    x = torch.as_tensor(x_raw * scale, dtype=torch.float64)
    y = torch.as_tensor(dataset.labels, dtype=torch.int64)

    best: Optional[DiscriminatorModel] = None
    for restart in range(cfg.restarts):
        policy = LowLatencyPolicy.from_params(PolicyParams.init(topo, rng))
        optimizer = torch.optim.Adam(
            policy.parameters(), lr=hp.adam_lr, betas=(hp.adam_beta1, hp.adam_beta2)
        )
        losses: list[float] = []
        converged = False
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(dataset))
            for start in range(0, len(order), cfg.batch_size):
                idx = torch.as_tensor(order[start : start + cfg.batch_size], dtype=torch.int64)
                loss = F.cross_entropy(policy(x[idx]), y[idx])
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            with torch.no_grad():
                losses.append(float(F.cross_entropy(policy(x), y)))
            if len(losses) > cfg.patience and losses[-cfg.patience - 1] - min(losses[-cfg.patience :]) < cfg.tol:
                converged = True
                break
        if not converged:
            logger.warning(
                "Classifier at tau=%.0f ns, restart %d: no plateau after %d epochs",
                tau * 1e9, restart, cfg.epochs,
            )
        candidate = DiscriminatorModel(
            policy.export_params(), scale, n_samples, losses[-1], converged, len(losses), losses
        )
        if best is None or candidate.train_loss < best.train_loss:
            best = candidate
    return best


@dataclass
class MatchedFilterClassifier:
    """Matched-filter integration thresholded halfway between the class means."""

    weights: FilterWeights
    threshold: float
    n_samples: int

    @classmethod
    def fit(cls, dataset: LabeledTraceSet, n_samples: int) -> "MatchedFilterClassifier":
        cut_g = [t.truncate(n_samples, dataset.sample_rate) for t in dataset.with_label(0)]
        cut_e = [t.truncate(n_samples, dataset.sample_rate) for t in dataset.with_label(1)]
        weights = estimate_weights(cut_g, cut_e)
        threshold = 0.5 * (integrate_many(cut_g, weights).mean() + integrate_many(cut_e, weights).mean())
        return cls(weights, float(threshold), n_samples)

    def classify(self, traces: Sequence[Trace], sample_rate: float) -> np.ndarray:
        cut = [t.truncate(self.n_samples, sample_rate) for t in traces]
        return (integrate_many(cut, self.weights) >= self.threshold).astype(int)


def _stderr(assigned: np.ndarray, labels: np.ndarray) -> float:
    var = 0.0
    for label in (0, 1):
        mask = labels == label
        p = float(np.mean(assigned[mask] != label))
        var += p * (1.0 - p) / mask.sum()
    return 0.5 * math.sqrt(var)


def error_decomposition(
    dataset: LabeledTraceSet, assigned: np.ndarray, tau: float
) -> dict[str, float]:
    """Split the symmetric infidelity into preparation, decay and overlap parts.

    Each misassigned trace gets exactly one cause, so the parts add up to the
    infidelity.
    """
    parts = {"preparation": 0.0, "decay": 0.0, "overlap": 0.0}
    for label in (0, 1):
        mask = dataset.labels == label
        n = int(mask.sum())
        for trace, a, lab in zip(dataset.traces, assigned, dataset.labels):
            if lab != label or a == lab:
                continue
            if trace.initial_level is not None and int(trace.initial_level) != lab:
                cause = "preparation"
            elif trace.has_jump_before(tau):
                cause = "decay"
            else:
                cause = "overlap"
            parts[cause] += 0.5 / n
    return parts


@dataclass
class DiscriminationCurve:
    taus: list[float]
    nn_infidelity: list[float] = field(default_factory=list)
    nn_stderr: list[float] = field(default_factory=list)
    mf_infidelity: list[float] = field(default_factory=list)
    mf_stderr: list[float] = field(default_factory=list)
    overlap_error: list[float] = field(default_factory=list)
    decay_error: list[float] = field(default_factory=list)
    preparation_error: list[float] = field(default_factory=list)
    nn_converged: list[bool] = field(default_factory=list)
    # index of the candidate topology kept at each tau
    nn_topology: list[int] = field(default_factory=list)

    def rows(self) -> list[dict]:
        names = [f.name for f in dataclasses.fields(self)]
        return [dict(zip(names, values)) for values in zip(*(getattr(self, n) for n in names))]

    def save_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=[fld.name for fld in dataclasses.fields(self)])
            writer.writeheader()
            writer.writerows(
                {k: repr(v) if isinstance(v, float) else v for k, v in row.items()}
                for row in self.rows()
            )
        return path

    @classmethod
    def load_csv(cls, path: str | Path) -> "DiscriminationCurve":
        curve = cls(taus=[])
        with open(path, "r", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                for fld in dataclasses.fields(cls):
                    value = row[fld.name]
                    if fld.name == "nn_converged":
                        parsed = value == "True"
                    elif fld.name == "nn_topology":
                        parsed = int(value)
                    else:
                        parsed = float(value)
                    getattr(curve, fld.name).append(parsed)
        return curve


def discrimination_curve(
    dataset: LabeledTraceSet,
    topologies: NetTopology | Sequence[NetTopology],
    taus: Sequence[float],
    cfg: DiscriminationConfig,
    hp: PpoHyperparams,
    rng: np.random.Generator,
) -> DiscriminationCurve:
    """Validation infidelity of both classifiers at every observation time.

    Every candidate topology is trained at every tau; the one with the lowest
    training loss is evaluated on the validation half.
    """
    if isinstance(topologies, NetTopology):
        topologies = [topologies]
    topologies = list(topologies)
    if not topologies:
        raise ValueError("at least one network topology is needed")
    taus = [float(t) for t in taus]
    if taus != sorted(taus):
        raise ValueError("observation times must be ascending")
    if taus and taus[-1] > dataset.duration + 0.5 / dataset.sample_rate:
        raise ValueError(f"tau = {taus[-1]} s exceeds the {dataset.duration} s traces")
    train_set, val_set = dataset.train(), dataset.validation()
    curve = DiscriminationCurve(taus=taus)
    for tau in taus:
        n_samples = int(round(tau * dataset.sample_rate))
        mf = MatchedFilterClassifier.fit(train_set, n_samples)
        mf_assigned = mf.classify(val_set.traces, val_set.sample_rate)
        models = [train_classifier(train_set, topo, tau, cfg, hp, rng) for topo in topologies]
        kept = min(range(len(models)), key=lambda k: models[k].train_loss)
        model = models[kept]
        nn_assigned = model.classify(val_set.traces, val_set.sample_rate)

        curve.mf_infidelity.append(readout_infidelity(mf_assigned, val_set.labels, 2))
        curve.mf_stderr.append(_stderr(mf_assigned, val_set.labels))
        curve.nn_infidelity.append(readout_infidelity(nn_assigned, val_set.labels, 2))
        curve.nn_stderr.append(_stderr(nn_assigned, val_set.labels))
        curve.nn_converged.append(model.converged)
        curve.nn_topology.append(kept)
        parts = error_decomposition(val_set, mf_assigned, tau)
        curve.overlap_error.append(parts["overlap"])
        curve.decay_error.append(parts["decay"])
        curve.preparation_error.append(parts["preparation"])
        logger.info(
            "tau=%.0f ns: 1-F matched filter %.4f, network %.4f",
            tau * 1e9, curve.mf_infidelity[-1], curve.nn_infidelity[-1],
        )
    return curve
