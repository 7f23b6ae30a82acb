"""Feedback-loop latency accounting for the streaming network.

A dense layer with N inputs needs one clock cycle for the multiplications
and one per level of a 4-input adder tree over N products plus the bias:
tau_dense = clock * (1 + ceil(log4(N + 1))). All layers but the last run
while samples are still arriving, so only the boxcar filter and the final
layer add to the loop latency.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

from core.models.config import LatencyConfig, NetTopology
from core.models.quantum import Action

logger = logging.getLogger(__name__)


def ceil_log4(n: int) -> int:
    """Smallest k with 4**k >= n, in exact integer arithmetic."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k, power = 0, 1
    while power < n:
        power *= 4
        k += 1
    return k


def dense_layer_latency(n_inputs: int, clock_ns: float) -> float:
    return clock_ns * (1 + ceil_log4(n_inputs + 1))


@dataclass
class LatencyLedger:
    clock_ns: float
    layer_input_size: int
    per_layer_ns: float
    boxcar_ns: float
    total_nn_ns: float
    preprocessing_ns: float
    # per stream layer: True if it runs during acquisition and adds no loop latency
    overlaps_acquisition: list[bool]
    total_loop_ns: float
    readout_ns: float
    pulse_ns: float
    min_cycle_ns: float
    cycle_ns: Optional[float] = None
    electronics: Optional[dict] = None

    @property
    def cycle_ok(self) -> bool:
        return self.cycle_ns is None or self.cycle_ns >= self.min_cycle_ns

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LatencyLedger":
        return cls(**data)


def latency_report(
    topology: NetTopology,
    latency: Optional[LatencyConfig] = None,
    sample_rate: float = 1e9,
    cycle_time: Optional[float] = None,
) -> LatencyLedger:
    latency = latency or LatencyConfig()
    clock = latency.clock_ns
    n_inputs = topology.layer_input_size
    per_layer = dense_layer_latency(n_inputs, clock)
    # the boxcar block must be complete, then one clock cycle to sum it
    sample_ns = 1e9 / sample_rate
    boxcar = topology.boxcar_width * sample_ns + clock
    preproc_inputs = [topology.memory_features] + [topology.preproc_width] * (topology.preproc_layers - 1)
    preprocessing = sum(dense_layer_latency(n, clock) for n in preproc_inputs)

    # the FPGA figure already contains the network and the preprocessing overhead
    total_loop = latency.adc_ns + latency.awg_ns + latency.fpga_ns + latency.propagation_ns
    readout_ns = topology.readout_len * sample_ns
    pulse = latency.gf_pulse_ns if topology.n_actions == len(Action) else latency.eg_pulse_ns
    min_cycle = readout_ns + pulse + total_loop
    cycle_ns = cycle_time * 1e9 if cycle_time is not None else None

    ledger = LatencyLedger(
        clock_ns=clock,
        layer_input_size=n_inputs,
        per_layer_ns=per_layer,
        boxcar_ns=boxcar,
        total_nn_ns=boxcar + per_layer,
        preprocessing_ns=preprocessing,
        overlaps_acquisition=[j < topology.n_stream_layers - 1 for j in range(topology.n_stream_layers)],
        total_loop_ns=total_loop,
        readout_ns=readout_ns,
        pulse_ns=pulse,
        min_cycle_ns=min_cycle,
        cycle_ns=cycle_ns,
        electronics={
            "adc_ns": latency.adc_ns,
            "awg_ns": latency.awg_ns,
            "fpga_ns": latency.fpga_ns,
            "propagation_ns": latency.propagation_ns,
            "preprocessing_overhead_ns": latency.preprocessing_overhead_ns,
        },
    )
    if not ledger.cycle_ok:
        logger.warning(
            "Cycle time %.0f ns is shorter than the minimum %.0f ns", cycle_ns, min_cycle
        )
    return ledger
