"""The streaming feedforward policy network.

Deployed inference runs on plain numpy parameters (`PolicyParams`,
`forward_stream`), mirroring the FPGA: a preprocessing network digests the
previous cycles before the readout starts, then every hidden layer and the
output layer each receive the next block of boxcar-downsampled I/Q samples
next to the previous layer's activations. Training uses the same wiring as
a float64 torch module (`LowLatencyPolicy`), which converts to and from
`PolicyParams`.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from torch.distributions import Categorical

from core.models.config import NetTopology
from core.models.quantum import Action, History, Trace

if TYPE_CHECKING:
    from .quantize import FixedPointScheme

logger = logging.getLogger(__name__)

Layer = tuple[np.ndarray, np.ndarray]


class ShapeMismatchError(ValueError):
    """Raised when parameters or inputs do not fit the network topology."""

    pass


def boxcar(samples: np.ndarray, width: int) -> np.ndarray:
    """Means over non-overlapping blocks of `width`; a trailing partial block is dropped."""
    if width <= 0:
        raise ValueError(f"boxcar width must be > 0, got {width}")
    samples = np.asarray(samples, dtype=float)
    usable = len(samples) // width * width
    return samples[:usable].reshape(-1, width).mean(axis=1)


def _fit_length(values: np.ndarray, n: int) -> np.ndarray:
    """Zero-fill or cut to exactly n entries."""
    out = np.zeros(n)
    k = min(n, len(values))
    out[:k] = values[:k]
    return out


@dataclass
class ObservationWindow:
    """Network input for one decision.

    `stream` has one row per stream layer: the layer's I block followed by
    its Q block. `memory` holds, most recent cycle first, the boxcar-32 I and
    Q samples and the one-hot action of each of the last l cycles.
    """

    stream: np.ndarray
    memory: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.memory, self.stream.ravel()])

    @classmethod
    def from_flat(cls, flat: np.ndarray, topology: NetTopology) -> "ObservationWindow":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (topology.observation_size,):
            raise ShapeMismatchError(
                f"observation has shape {flat.shape}, expected ({topology.observation_size},)"
            )
        m = topology.memory_features
        stream = flat[m:].reshape(topology.n_stream_layers, topology.inputs_per_layer)
        return cls(stream, flat[:m])


def stream_blocks(trace: Trace, topology: NetTopology) -> np.ndarray:
    """Downsampled current trace arranged as per-layer [I block, Q block] rows."""
    k = topology.samples_per_block
    n = topology.n_stream_layers * k
    i_ds = _fit_length(boxcar(trace.i_samples, topology.boxcar_width), n).reshape(-1, k)
    q_ds = _fit_length(boxcar(trace.q_samples, topology.boxcar_width), n).reshape(-1, k)
    return np.hstack([i_ds, q_ds])


def encode_cycle(trace: Trace, action: Action, topology: NetTopology) -> np.ndarray:
    n = topology.memory_samples_per_quadrature
    one_hot = np.zeros(topology.n_actions)
    one_hot[int(action)] = 1.0
    return np.concatenate(
        [
            _fit_length(boxcar(trace.i_samples, topology.memory_boxcar_width), n),
            _fit_length(boxcar(trace.q_samples, topology.memory_boxcar_width), n),
            one_hot,
        ]
    )


def build_window(trace: Trace, history: History, topology: NetTopology) -> ObservationWindow:
    """Encode the current trace and the last `memory_depth` (trace, action) pairs.

    Cycles before the start of the episode are encoded as zeros.
    """
    per_cycle = topology.memory_features_per_cycle
    memory = np.zeros(topology.memory_features)
    recent = list(history)[::-1][: topology.memory_depth]
    for slot, (past_trace, past_action) in enumerate(recent):
        memory[slot * per_cycle : (slot + 1) * per_cycle] = encode_cycle(
            past_trace, past_action, topology
        )
    return ObservationWindow(stream_blocks(trace, topology), memory)


def _layer_shapes(topology: NetTopology) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    preproc = []
    width_in = topology.memory_features
    for _ in range(topology.preproc_layers):
        preproc.append((topology.preproc_width, width_in))
        width_in = topology.preproc_width
    stream = []
    for j in range(topology.n_stream_layers):
        out = topology.n_actions if j == topology.n_stream_layers - 1 else topology.hidden_width
        stream.append((out, width_in + topology.inputs_per_layer))
        width_in = out
    return preproc, stream


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Immutable network parameters, one (kernel, bias) pair per layer."""

    topology: NetTopology
    preproc: tuple[Layer, ...]
    layers: tuple[Layer, ...]
    fixed_point: Optional["FixedPointScheme"] = None
    saturated: bool = False

    def __post_init__(self):
        preproc_shapes, stream_shapes = _layer_shapes(self.topology)
        for name, layers, shapes in (
            ("preprocessing", self.preproc, preproc_shapes),
            ("stream", self.layers, stream_shapes),
        ):
            if len(layers) != len(shapes):
                raise ShapeMismatchError(
                    f"{len(layers)} {name} layers given, topology needs {len(shapes)}"
                )
            for j, ((w, b), shape) in enumerate(zip(layers, shapes)):
                if w.shape != shape or b.shape != (shape[0],):
                    raise ShapeMismatchError(
                        f"{name} layer {j}: kernel {w.shape} / bias {b.shape}, expected {shape}"
                    )
                if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                    raise ValueError(f"{name} layer {j} has non-finite parameters")

    @classmethod
    def init(cls, topology: NetTopology, rng: np.random.Generator) -> "PolicyParams":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
        preproc_shapes, stream_shapes = _layer_shapes(topology)

        def make(shape):
            bound = 1.0 / np.sqrt(shape[1]) if shape[1] > 0 else 0.0
            return (
                rng.uniform(-bound, bound, size=shape),
                rng.uniform(-bound, bound, size=shape[0]) if bound else np.zeros(shape[0]),
            )

        return cls(
            topology,
            tuple(make(s) for s in preproc_shapes),
            tuple(make(s) for s in stream_shapes),
        )

    @classmethod
    def zeros(cls, topology: NetTopology) -> "PolicyParams":
        preproc_shapes, stream_shapes = _layer_shapes(topology)

        def make(shape):
            return np.zeros(shape), np.zeros(shape[0])

        return cls(
            topology,
            tuple(make(s) for s in preproc_shapes),
            tuple(make(s) for s in stream_shapes),
        )

    def theta(self) -> np.ndarray:
        """Flat parameter vector, kernels then bias, layer by layer."""
        parts = []
        for w, b in self.preproc + self.layers:
            parts.extend([w.ravel(), b])
        return np.concatenate(parts)

    @classmethod
    def from_theta(cls, topology: NetTopology, theta: np.ndarray) -> "PolicyParams":
        preproc_shapes, stream_shapes = _layer_shapes(topology)
        theta = np.asarray(theta, dtype=float)
        offset = 0

        def take(shape):
            nonlocal offset
            n_w = shape[0] * shape[1]
            w = theta[offset : offset + n_w].reshape(shape)
            b = theta[offset + n_w : offset + n_w + shape[0]]
            offset += n_w + shape[0]
            return w.copy(), b.copy()

        preproc = tuple(take(s) for s in preproc_shapes)
        layers = tuple(take(s) for s in stream_shapes)
        if offset != len(theta):
            raise ShapeMismatchError(f"theta has {len(theta)} entries, topology needs {offset}")
        return cls(topology, preproc, layers)

    @property
    def n_parameters(self) -> int:
        return len(self.theta())

    def to_dict(self) -> dict:
        data = {
            "topology": self.topology.to_dict(),
            "preproc": [{"w": w.tolist(), "b": b.tolist()} for w, b in self.preproc],
            "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in self.layers],
            "saturated": self.saturated,
        }
        if self.fixed_point is not None:
            data["fixed_point"] = self.fixed_point.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyParams":
        from .quantize import FixedPointScheme

        topology = NetTopology.from_dict(data["topology"])
        preproc_shapes, stream_shapes = _layer_shapes(topology)

        def load(entries, shapes):
            return tuple(
                (
                    np.asarray(e["w"], dtype=float).reshape(s),
                    np.asarray(e["b"], dtype=float).reshape(s[0]),
                )
                for e, s in zip(entries, shapes)
            )

        fixed_point = data.get("fixed_point")
        return cls(
            topology,
            load(data["preproc"], preproc_shapes),
            load(data["layers"], stream_shapes),
            FixedPointScheme.from_dict(fixed_point) if fixed_point else None,
            bool(data.get("saturated", False)),
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def _check_window(params: PolicyParams, window: ObservationWindow) -> None:
    topo = params.topology
    expected_stream = (topo.n_stream_layers, topo.inputs_per_layer)
    if window.stream.shape != expected_stream:
        raise ShapeMismatchError(f"stream block shape {window.stream.shape}, expected {expected_stream}")
    if window.memory.shape != (topo.memory_features,):
        raise ShapeMismatchError(
            f"memory shape {window.memory.shape}, expected ({topo.memory_features},)"
        )


def forward_stream(params: PolicyParams, window: ObservationWindow) -> np.ndarray:
    """Action probabilities, evaluated layer by layer as the samples arrive."""
    _check_window(params, window)
    quantized = params.fixed_point
    h = window.memory
    for w, b in params.preproc:
        h = np.maximum(w @ h + b, 0.0)
        if quantized is not None:
            h = quantized.apply(h)[0]

    last = len(params.layers) - 1
    for j, (w, b) in enumerate(params.layers):
        x = np.concatenate([h, window.stream[j]])
        if quantized is not None:
            x = quantized.apply(x)[0]
        z = w @ x + b
        h = z if j == last else np.maximum(z, 0.0)
        if quantized is not None:
            h = quantized.apply(h)[0]
    return softmax(h)


def forward_flat(params: PolicyParams, flat_input: np.ndarray) -> np.ndarray:
    """Non-streaming reference evaluation of the same wiring.

    Every stream layer sees the complete observation vector through a kernel
    that is zero outside the columns of its own sample block.
    """
    topo = params.topology
    flat_input = np.asarray(flat_input, dtype=float)
    if flat_input.shape != (topo.observation_size,):
        raise ShapeMismatchError(
            f"flat input shape {flat_input.shape}, expected ({topo.observation_size},)"
        )
    m = topo.memory_features
    h = flat_input[:m]
    for w, b in params.preproc:
        h = np.maximum(w @ h + b, 0.0)

    last = len(params.layers) - 1
    for j, (w, b) in enumerate(params.layers):
        n_prev = len(h)
        full = np.zeros((w.shape[0], n_prev + len(flat_input)))
        full[:, :n_prev] = w[:, :n_prev]
        start = n_prev + m + j * topo.inputs_per_layer
        full[:, start : start + topo.inputs_per_layer] = w[:, n_prev:]
        z = full @ np.concatenate([h, flat_input]) + b
        h = z if j == last else np.maximum(z, 0.0)
    return softmax(h)


class LowLatencyPolicy(nn.Module):
    """Trainable float64 twin of the streaming network."""

    def __init__(self, topology: NetTopology):
        super().__init__()
        self.topology = topology
        preproc_shapes, stream_shapes = _layer_shapes(topology)
        self.preproc = nn.ModuleList(nn.Linear(n_in, n_out) for n_out, n_in in preproc_shapes)
        self.layers = nn.ModuleList(nn.Linear(n_in, n_out) for n_out, n_in in stream_shapes)
        self.double()

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        """Logits for a batch of flat observations, shape (batch, n_actions)."""
        topo = self.topology
        if obs.shape[-1] != topo.observation_size:
            raise ShapeMismatchError(
                f"observation width {obs.shape[-1]}, expected {topo.observation_size}"
            )
        m = topo.memory_features
        h = obs[:, :m]
        stream = obs[:, m:].reshape(-1, topo.n_stream_layers, topo.inputs_per_layer)
        for layer in self.preproc:
            h = F.relu(layer(h))
        last = len(self.layers) - 1
        for j, layer in enumerate(self.layers):
            z = layer(torch.cat([h, stream[:, j]], dim=1))
            h = z if j == last else F.relu(z)
        return h

    def distribution(self, obs: torch.Tensor) -> Categorical:
        return Categorical(logits=self(obs))

    def probabilities(self, obs: torch.Tensor) -> torch.Tensor:
        return F.softmax(self(obs), dim=-1)

    def export_params(self) -> PolicyParams:
        def layer(linear: nn.Linear) -> Layer:
            return (
                linear.weight.detach().cpu().numpy().copy(),
                linear.bias.detach().cpu().numpy().copy(),
            )

        return PolicyParams(
            self.topology,
            tuple(layer(l) for l in self.preproc),
            tuple(layer(l) for l in self.layers),
        )

    def load_params(self, params: PolicyParams) -> None:
        if params.topology != self.topology:
            raise ShapeMismatchError("parameters were built for a different topology")
        with torch.no_grad():
            for linear, (w, b) in zip(list(self.preproc) + list(self.layers), params.preproc + params.layers):
                linear.weight.copy_(torch.from_numpy(np.asarray(w, dtype=np.float64)))
                linear.bias.copy_(torch.from_numpy(np.asarray(b, dtype=np.float64)))

    @classmethod
    def from_params(cls, params: PolicyParams) -> "LowLatencyPolicy":
        policy = cls(params.topology)
        policy.load_params(params)
        return policy


def encode_observations(windows: Sequence[ObservationWindow]) -> np.ndarray:
    return np.stack([w.flat() for w in windows])
