import logging
from typing import Optional

import numpy as np

from core.config import ConfigValidationError, validate_env_config
from core.models.config import EnvConfig
from core.models.quantum import (
    Action,
    DecisionCallback,
    EnvState,
    Episode,
    InitialStatePrep,
    MeasurementStrength,
    QuantumLevel,
    Trace,
    legal_actions,
)

from . import markov
from .traces import MeanTraceModel

logger = logging.getLogger(__name__)

_G, _E, _F = QuantumLevel.G, QuantumLevel.E, QuantumLevel.F
_EG_SWAP = {_G: _E, _E: _G, _F: _F}
_FE_SWAP = {_G: _G, _E: _F, _F: _E}
_GF_SWAP = {_G: _F, _E: _E, _F: _G}

_HERALDED = {
    InitialStatePrep.GROUND: _G,
    InitialStatePrep.EXCITED: _E,
    InitialStatePrep.SECOND_EXCITED: _F,
}


class EnvProtocolError(Exception):
    """Raised when a policy emits an action that is illegal in the current mode."""

    pass


def default_n_actions(cfg: EnvConfig) -> int:
    return 4 if cfg.levels == 3 else 3


def prepare(cfg: EnvConfig, prep: InitialStatePrep, rng: np.random.Generator) -> EnvState:
    """Sample the hidden state from the requested initial distribution."""
    prep = InitialStatePrep(prep)
    if prep == InitialStatePrep.EQUILIBRIUM:
        return EnvState(_E if rng.random() < cfg.p_therm else _G)
    if prep == InitialStatePrep.INVERTED:
        state = prepare(cfg, InitialStatePrep.EQUILIBRIUM, rng)
        return apply_action(state, Action.FLIP, cfg, rng)
    if prep == InitialStatePrep.QUTRIT_MIXED:
        if cfg.levels != 3:
            raise ConfigValidationError(
                "qutrit_mixed preparation requires env.levels = 3", field="env.levels"
            )
        return EnvState(QuantumLevel(int(rng.integers(3))))
    if prep == InitialStatePrep.QUBIT_MIXED:
        return EnvState(QuantumLevel(int(rng.integers(2))))

    level = _HERALDED[prep]
    if level == _F and cfg.levels != 3:
        raise ConfigValidationError(
            "second_excited preparation requires env.levels = 3", field="env.levels"
        )
    return EnvState(level)


def evolve(
    state: EnvState, duration: float, cfg: EnvConfig, rng: np.random.Generator
) -> EnvState:
    return markov.evolve(state, duration, cfg, rng)


def measure(
    state: EnvState,
    strength: MeasurementStrength,
    cfg: EnvConfig,
    rng: np.random.Generator,
    n_samples: Optional[int] = None,
    model: Optional[MeanTraceModel] = None,
) -> tuple[Trace, EnvState]:
    """Acquire one readout record while the level keeps jumping.

    The emitted trace follows the mean trace of whichever level is occupied
    at each sample, plus white Gaussian noise on both quadratures.
    """
    model = model or MeanTraceModel(cfg)
    n = n_samples or cfg.readout_len
    duration = n / cfg.sample_rate

    path = markov.sample_path(state.level, duration, cfg, rng)
    jump_times = np.array([t for t, _ in path])
    path_levels = np.array([int(lvl) for _, lvl in path])
    sample_times = np.arange(n) / cfg.sample_rate
    occupied = path_levels[np.searchsorted(jump_times, sample_times, side="right") - 1]

    means = model.mean_traces(n)
    signal = means[occupied, np.arange(n)]
    sigma = model.noise_sigma(strength)
    if sigma > 0:
        signal = signal + rng.normal(0.0, sigma, size=(n, 2))

    trace = Trace(signal[:, 0], signal[:, 1], tuple(path))
    return trace, EnvState(path[-1][1], state.elapsed + duration)


def apply_action(
    state: EnvState, action: Action, cfg: EnvConfig, rng: np.random.Generator
) -> EnvState:
    """Instantaneous pulse map; each pi-pulse fails to identity with prob. flip_error.

    A gf-flip is an fe pulse followed by an eg pulse. With both pulses working
    it acts as the ideal g<->f swap and leaves E in place; if only one fires,
    the state sees that single swap.
    """
    action = Action(action)
    if action in (Action.IDLE, Action.TERMINATE):
        return state

    if action == Action.FLIP:
        if rng.random() >= cfg.flip_error:
            return EnvState(_EG_SWAP[state.level], state.elapsed)
        return state

    if cfg.levels != 3:
        raise EnvProtocolError("gf-flip is only available in three-level mode")
    fe_ok = rng.random() >= cfg.flip_error
    eg_ok = rng.random() >= cfg.flip_error
    if fe_ok and eg_ok:
        mapping = _GF_SWAP
    elif eg_ok:
        mapping = _EG_SWAP
    elif fe_ok:
        mapping = _FE_SWAP
    else:
        return state
    return EnvState(mapping[state.level], state.elapsed)


def run_episode(
    policy: DecisionCallback,
    cfg: EnvConfig,
    prep: InitialStatePrep,
    max_cycles: int,
    rng: np.random.Generator,
    strength: MeasurementStrength = MeasurementStrength.STRONG,
    n_actions: Optional[int] = None,
    model: Optional[MeanTraceModel] = None,
) -> Episode:
    """One initialization attempt.

    Each cycle is: readout, decision, pulse, then idle for the rest of the
    cycle time. On Terminate (or once max_cycles actions are taken) the state
    idles for verify_delay and a verification readout closes the episode.
    """
    if max_cycles < 1:
        raise ValueError(f"max_cycles must be >= 1, got {max_cycles}")
    model = model or MeanTraceModel(cfg)
    allowed = legal_actions(n_actions or default_n_actions(cfg))
    idle_time = max(cfg.cycle_time - cfg.readout_duration, 0.0)

    state = prepare(cfg, prep, rng)
    episode = Episode(prep=InitialStatePrep(prep), initial_level=state.level)
    history: list[tuple[Trace, Action]] = []

    for cycle in range(max_cycles):
        trace, state = measure(state, strength, cfg, rng, model=model)
        action = policy(trace, tuple(history))
        try:
            action = Action(action)
        except ValueError as e:
            raise EnvProtocolError(f"policy returned {action!r}, not an Action") from e
        if action not in allowed:
            raise EnvProtocolError(
                f"action {action.name} is illegal with {len(allowed)} actions"
            )

        episode.observations.append(trace)
        episode.actions.append(action)
        history.append((trace, action))
        if action == Action.TERMINATE:
            break
        state = apply_action(state, action, cfg, rng)
        if cycle < max_cycles - 1:
            state = evolve(state, idle_time, cfg, rng)
    else:
        episode.forced_termination = True

    state = evolve(state, cfg.verify_delay, cfg, rng)
    episode.verification, _ = measure(state, strength, cfg, rng, model=model)
    logger.debug(
        "episode prep=%s cycles=%d forced=%s", episode.prep.value, episode.n_cycles,
        episode.forced_termination,
    )
    return episode


class QubitEnvironment:
    """A simulated transmon owning its configuration, trace model and rng stream.

    One instance serves one episode at a time; run several instances for
    parallel collection.
    """

    def __init__(
        self,
        cfg: EnvConfig,
        rng: Optional[np.random.Generator] = None,
        strength: MeasurementStrength = MeasurementStrength.STRONG,
        n_actions: Optional[int] = None,
    ):
        validate_env_config(cfg)
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng()
        self.strength = MeasurementStrength(strength)
        self.n_actions = n_actions or default_n_actions(cfg)
        if self.n_actions == 4 and cfg.levels != 3:
            raise ConfigValidationError(
                "four actions require env.levels = 3", field="network.n_actions"
            )
        self.model = MeanTraceModel(cfg)

    def prepare(self, prep: InitialStatePrep) -> EnvState:
        return prepare(self.cfg, prep, self.rng)

    def evolve(self, state: EnvState, duration: float) -> EnvState:
        return evolve(state, duration, self.cfg, self.rng)

    def measure(
        self,
        state: EnvState,
        strength: Optional[MeasurementStrength] = None,
        n_samples: Optional[int] = None,
    ) -> tuple[Trace, EnvState]:
        return measure(
            state, strength or self.strength, self.cfg, self.rng, n_samples, self.model
        )

    def apply_action(self, state: EnvState, action: Action) -> EnvState:
        return apply_action(state, action, self.cfg, self.rng)

    def run_episode(
        self,
        policy: DecisionCallback,
        prep: InitialStatePrep,
        max_cycles: Optional[int] = None,
    ) -> Episode:
        return run_episode(
            policy,
            self.cfg,
            prep,
            max_cycles or self.cfg.max_cycles,
            self.rng,
            self.strength,
            self.n_actions,
            self.model,
        )

    def sample_traces(
        self,
        prep: InitialStatePrep,
        n: int,
        strength: Optional[MeasurementStrength] = None,
        n_samples: Optional[int] = None,
    ) -> list[Trace]:
        """Single-shot readouts of freshly prepared states (calibration ensembles)."""
        traces = []
        for _ in range(n):
            state = self.prepare(prep)
            trace, _ = self.measure(state, strength, n_samples)
            traces.append(trace)
        return traces
