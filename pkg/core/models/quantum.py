from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, Optional, Sequence

import numpy as np


class QuantumLevel(IntEnum):
    """Transmon levels. F only exists in three-level mode."""

    G = 0
    E = 1
    F = 2


class Action(IntEnum):
    """Agent actions.

    The integer value is the index of the action neuron in the policy output,
    ordered so that a threshold strategy moves Terminate -> Idle -> Flip as the
    integrated signal grows.
    """

    TERMINATE = 0
    IDLE = 1
    FLIP = 2
    GF_FLIP = 3


class InitialStatePrep(str, Enum):
    EQUILIBRIUM = "equilibrium"
    INVERTED = "inverted"
    QUTRIT_MIXED = "qutrit_mixed"
    QUBIT_MIXED = "qubit_mixed"
    # heralded calibration preparations
    GROUND = "ground"
    EXCITED = "excited"
    SECOND_EXCITED = "second_excited"


class MeasurementStrength(str, Enum):
    STRONG = "strong"
    WEAK = "weak"


def legal_actions(n_actions: int) -> tuple[Action, ...]:
    """Actions available to an agent with `n_actions` output neurons."""
    if n_actions not in (3, 4):
        raise ValueError(f"n_actions must be 3 or 4, got {n_actions}")
    return tuple(Action(i) for i in range(n_actions))


@dataclass(frozen=True)
class EnvState:
    """Hidden state of the environment. Never shown to the policy."""

    level: QuantumLevel
    elapsed: float = 0.0


@dataclass
class Trace:
    """One digitized readout record.

    `latent_path` holds (time, level) pairs of the hidden trajectory during
    acquisition; it starts at t=0 with the pre-measurement level and its last
    entry is the post-measurement level. Only tests and oracle policies read it.
    """

    i_samples: np.ndarray
    q_samples: np.ndarray
    latent_path: tuple[tuple[float, QuantumLevel], ...] = ()

    def __post_init__(self):
        self.i_samples = np.asarray(self.i_samples, dtype=float)
        self.q_samples = np.asarray(self.q_samples, dtype=float)
        if self.i_samples.shape != self.q_samples.shape:
            raise ValueError(
                f"I/Q length mismatch: {self.i_samples.shape} vs {self.q_samples.shape}"
            )

    def __len__(self) -> int:
        return len(self.i_samples)

    def concatenated(self) -> np.ndarray:
        """[I_0..I_n-1, Q_0..Q_n-1], the vector the filter weights act on."""
        return np.concatenate([self.i_samples, self.q_samples])

    def truncate(self, n_samples: int, sample_rate: float) -> "Trace":
        """First `n_samples` samples, with the latent path cut at the same time."""
        duration = n_samples / sample_rate
        path = tuple((t, lvl) for t, lvl in self.latent_path if t < duration)
        return Trace(self.i_samples[:n_samples], self.q_samples[:n_samples], path)

    @property
    def initial_level(self) -> Optional[QuantumLevel]:
        return self.latent_path[0][1] if self.latent_path else None

    @property
    def final_level(self) -> Optional[QuantumLevel]:
        return self.latent_path[-1][1] if self.latent_path else None

    def has_jump_before(self, t: float) -> bool:
        return any(0.0 < time < t for time, _ in self.latent_path[1:])


History = Sequence[tuple[Trace, Action]]
# decision callback: current observation and previous (trace, action) pairs, oldest first
DecisionCallback = Callable[[Trace, History], Action]


@dataclass
class Episode:
    """One initialization attempt: measure/act cycles plus verification."""

    prep: InitialStatePrep
    observations: list[Trace] = field(default_factory=list)
    actions: list[Action] = field(default_factory=list)
    verification: Optional[Trace] = None
    rewards: Optional[np.ndarray] = None
    forced_termination: bool = False
    initial_level: Optional[QuantumLevel] = None

    @property
    def n_cycles(self) -> int:
        return len(self.actions)

    @property
    def final_level(self) -> Optional[QuantumLevel]:
        """Latent level at the end of the verification readout."""
        return self.verification.final_level if self.verification is not None else None
