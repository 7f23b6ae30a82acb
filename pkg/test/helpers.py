"""Small shared builders for the test modules."""

import dataclasses

import numpy as np

from core.models.config import EnvConfig, GlobalConfig, NetTopology, PpoHyperparams
from core.models.quantum import Action, Trace


def quiet_env(**overrides) -> EnvConfig:
    """No thermal excitation, no decay during the test horizon, perfect pulses."""
    base = dict(p_therm=0.0, t1_e=1.0, t1_f=1.0, flip_error=0.0)
    base.update(overrides)
    return EnvConfig(**base)


def small_topology(**overrides) -> NetTopology:
    base = dict(
        n_hidden_layers=3,
        hidden_width=6,
        inputs_per_layer=4,
        preproc_layers=1,
        preproc_width=4,
        boxcar_width=8,
        memory_boxcar_width=16,
        readout_len=64,
    )
    base.update(overrides)
    return NetTopology(**base)


def small_ppo(**overrides) -> PpoHyperparams:
    base = dict(
        batch_measurements=60,
        training_steps=2,
        epochs=2,
        validation_episodes=50,
        checkpoint_every=1,
        critic_width=16,
    )
    base.update(overrides)
    return PpoHyperparams(**base)


def fast_config(scenario: str = "strong-qubit", **env_overrides) -> GlobalConfig:
    """A strong-qubit config small enough to train in seconds."""
    from core.config import apply_scenario

    cfg = GlobalConfig(
        env=EnvConfig(readout_len=64, max_cycles=4, **env_overrides),
        network=small_topology(),
        ppo=small_ppo(),
    )
    cfg = dataclasses.replace(
        cfg,
        readout=dataclasses.replace(cfg.readout, calibration_shots=2000, bootstrap_resamples=20),
        experiment=dataclasses.replace(cfg.experiment, validation_size=200),
    )
    return apply_scenario(cfg, scenario)


def random_trace(n: int, rng: np.random.Generator) -> Trace:
    return Trace(rng.normal(size=n), rng.normal(size=n))


def constant_policy(action: Action):
    def decide(trace, history):
        return action

    return decide
