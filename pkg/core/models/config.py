from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from core import constants


@dataclass
class WeakReadoutConfig:
    """Weak-measurement settings.

    The weak SNR is back-solved from the g/e overlap integral unless given.
    """

    overlap: float = constants.WEAK_OVERLAP
    snr: Optional[float] = None


@dataclass
class EnvConfig:
    """Physical and noise parameters of the simulated transmon."""

    t1_e: float = constants.T1_E
    t1_f: float = constants.T1_F
    p_therm: float = constants.P_THERM
    readout_len: int = constants.READOUT_LEN
    sample_rate: float = constants.SAMPLE_RATE
    cycle_time: float = constants.CYCLE_TIME
    verify_delay: float = constants.VERIFY_DELAY
    snr: float = constants.STRONG_SNR
    flip_error: float = constants.FLIP_ERROR
    levels: int = 2
    max_cycles: int = constants.MAX_CYCLES

    # exponential ring-up model of the mean traces
    ring_up_time: float = constants.RING_UP_TIME
    steady_g: tuple[float, float] = constants.STEADY_G
    steady_e: tuple[float, float] = constants.STEADY_E
    steady_f: tuple[float, float] = constants.STEADY_F

    # tabulated mean traces, shape (levels, readout_len, 2); overrides ring-up model
    mean_traces: Optional[np.ndarray] = None
    mean_traces_csv: Optional[str] = None

    weak: WeakReadoutConfig = field(default_factory=WeakReadoutConfig)

    @property
    def readout_duration(self) -> float:
        return self.readout_len / self.sample_rate

    @property
    def rethermalization_floor(self) -> float:
        return self.p_therm * self.verify_delay / self.t1_e


@dataclass
class NetTopology:
    """Shape of the streaming policy network."""

    n_hidden_layers: int = 7
    hidden_width: int = 12
    inputs_per_layer: int = 8
    preproc_layers: int = 2
    preproc_width: int = 12
    memory_depth: int = 0
    n_actions: int = 3
    boxcar_width: int = 8
    memory_boxcar_width: int = 32
    readout_len: int = constants.READOUT_LEN

    @property
    def layer_input_size(self) -> int:
        return self.hidden_width + self.inputs_per_layer

    @property
    def n_stream_layers(self) -> int:
        """Hidden layers plus the output layer; each one receives a fresh block."""
        return self.n_hidden_layers + 1

    @property
    def samples_per_block(self) -> int:
        """Downsampled samples per quadrature injected into one layer."""
        return self.inputs_per_layer // 2

    @property
    def memory_samples_per_quadrature(self) -> int:
        return self.readout_len // self.memory_boxcar_width

    @property
    def memory_features_per_cycle(self) -> int:
        return 2 * self.memory_samples_per_quadrature + self.n_actions

    @property
    def memory_features(self) -> int:
        return self.memory_depth * self.memory_features_per_cycle

    @property
    def stream_features(self) -> int:
        return self.n_stream_layers * self.inputs_per_layer

    @property
    def observation_size(self) -> int:
        return self.memory_features + self.stream_features

    def to_dict(self) -> dict:
        return {
            "n_hidden_layers": self.n_hidden_layers,
            "hidden_width": self.hidden_width,
            "inputs_per_layer": self.inputs_per_layer,
            "preproc_layers": self.preproc_layers,
            "preproc_width": self.preproc_width,
            "memory_depth": self.memory_depth,
            "n_actions": self.n_actions,
            "boxcar_width": self.boxcar_width,
            "memory_boxcar_width": self.memory_boxcar_width,
            "readout_len": self.readout_len,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetTopology":
        return cls(**{k: int(v) for k, v in data.items()})


@dataclass
class LatencyConfig:
    """FPGA and converter timing used by the latency ledger (nanoseconds)."""

    clock_ns: float = constants.CLOCK_NS
    adc_ns: float = constants.ADC_NS
    awg_ns: float = constants.AWG_NS
    fpga_ns: float = constants.FPGA_NS
    propagation_ns: float = constants.PROPAGATION_NS
    preprocessing_overhead_ns: float = constants.PREPROCESSING_OVERHEAD_NS
    eg_pulse_ns: float = constants.EG_PULSE_NS
    gf_pulse_ns: float = constants.GF_PULSE_NS


@dataclass
class PpoHyperparams:
    adam_lr: float = 5e-4
    adam_beta1: float = 0.98
    adam_beta2: float = 0.999
    gamma: float = 0.92
    entropy_coef: float = 0.01
    cliprange: float = 0.04
    gae_lambda: float = 0.98
    minibatches: int = 1
    epochs: int = 8
    grad_clip: float = float("inf")
    batch_measurements: int = 1000
    training_steps: int = 500
    value_coef: float = 0.5
    normalize_advantages: bool = True
    critic_width: int = 64
    critic_layers: int = 2
    validation_episodes: int = constants.VALIDATION_EPISODES
    validate_every: int = 0
    checkpoint_every: int = 50
    max_training_episodes: Optional[int] = None
    stochastic_validation: bool = True


@dataclass
class RewardConfig:
    """Per-cycle reward r_t = (U_{t+1} - U_t) / (u_g - u_e) - lambda_penalty."""

    lambda_penalty: float = 0.02
    u_g: Optional[float] = None
    u_e: Optional[float] = None


@dataclass
class ReadoutConfig:
    calibration_shots: int = 20_000
    min_bins: int = constants.MIN_HISTOGRAM_BINS
    max_iter: int = 500
    tol: float = 1e-9
    bootstrap_resamples: int = constants.BOOTSTRAP_RESAMPLES


@dataclass
class DiscriminationConfig:
    n_traces: int = constants.DISCRIMINATION_TRACES
    trace_duration: float = 2e-6
    taus: list[float] = field(
        default_factory=lambda: [50e-9, 100e-9, 200e-9, 300e-9, 500e-9, 1e-6, 1.5e-6, 2e-6]
    )
    epochs: int = 300
    restarts: int = 3
    batch_size: int = 256
    heralded: bool = True
    # stop once the training loss improves by less than `tol` over `patience` epochs
    tol: float = 1e-4
    patience: int = 20


@dataclass
class ExperimentConfig:
    scenario: str = "strong-qubit"
    lambdas: list[float] = field(default_factory=lambda: [0.02])
    seeds: list[int] = field(default_factory=lambda: [0])
    validation_size: int = constants.VALIDATION_EPISODES
    prep: Optional[str] = None
    strength: str = "strong"
    threads: int = 1


@dataclass
class GlobalConfig:
    """Global configuration dataclass"""

    env: EnvConfig = field(default_factory=EnvConfig)
    network: NetTopology = field(default_factory=NetTopology)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    ppo: PpoHyperparams = field(default_factory=PpoHyperparams)
    reward: RewardConfig = field(default_factory=RewardConfig)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)
    discrimination: DiscriminationConfig = field(default_factory=DiscriminationConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
