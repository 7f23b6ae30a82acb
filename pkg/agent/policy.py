"""Decision callbacks that plug a policy into `run_episode`."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.models.quantum import Action, History, QuantumLevel, Trace

from .network import PolicyParams, build_window, forward_stream
from .sampling import greedy_action, sample_action

logger = logging.getLogger(__name__)


@dataclass
class DecisionRecord:
    """What the network saw and did in one cycle; the trainer replays these."""

    observation: np.ndarray
    probabilities: np.ndarray
    action: Action

    @property
    def log_prob(self) -> float:
        return float(np.log(self.probabilities[int(self.action)]))


class NetworkPolicy:
    """Streaming network acting through Gumbel-max sampling (or argmax when greedy)."""

    def __init__(
        self,
        params: PolicyParams,
        rng: Optional[np.random.Generator] = None,
        greedy: bool = False,
        record: bool = False,
    ):
        if not greedy and rng is None:
            raise ValueError("stochastic action selection needs an rng")
        self.params = params
        self.rng = rng
        self.greedy = greedy
        self.record = record
        self.records: list[DecisionRecord] = []

    @property
    def topology(self):
        return self.params.topology

    def probabilities(self, trace: Trace, history: History) -> np.ndarray:
        return forward_stream(self.params, build_window(trace, history, self.topology))

    def __call__(self, trace: Trace, history: History) -> Action:
        window = build_window(trace, history, self.topology)
        probs = forward_stream(self.params, window)
        action = greedy_action(probs) if self.greedy else sample_action(probs, self.rng)
        if self.record:
            self.records.append(DecisionRecord(window.flat(), probs, action))
        return action

    def drain(self) -> list[DecisionRecord]:
        """Recorded decisions since the last drain."""
        records, self.records = self.records, []
        return records


class OraclePolicy:
    """Cheats with the latent post-measurement level; bounds what any policy can reach.

    Simulation only: a real readout has no latent path.
    """

    def __init__(self, n_actions: int = 3):
        self.n_actions = n_actions

    def level_action(self, level: QuantumLevel) -> Action:
        if level == QuantumLevel.G:
            return Action.TERMINATE
        if level == QuantumLevel.E:
            return Action.FLIP
        # 3-action agents can only wait for f to decay
        return Action.GF_FLIP if self.n_actions == 4 else Action.IDLE

    def probabilities(self, trace: Trace, history: History) -> np.ndarray:
        probs = np.zeros(self.n_actions)
        probs[int(self(trace, history))] = 1.0
        return probs

    def __call__(self, trace: Trace, history: History) -> Action:
        if not trace.latent_path:
            raise ValueError("oracle policy needs traces with a latent path")
        return self.level_action(trace.final_level)
