"""Pieces shared by the command services: rng streams, environments, calibration."""

import dataclasses
import logging
from typing import Optional

import numpy as np

from agent.evaluation import ValidationMetrics
from core.config import config_hash, config_to_dict
from core.envsim import QubitEnvironment
from core.models.config import GlobalConfig
from core.models.quantum import InitialStatePrep, MeasurementStrength
from core.readout import ReadoutCalibration, calibrate_readout

from ..models import EvalMetrics, ExperimentSpec

logger = logging.getLogger(__name__)


def experiment_spec(cfg: GlobalConfig) -> ExperimentSpec:
    sections = config_to_dict(cfg)
    exp = cfg.experiment
    return ExperimentSpec(
        scenario=exp.scenario,
        env=sections["env"],
        topology=sections["network"],
        ppo=sections["ppo"],
        reward=sections["reward"],
        lambdas=list(exp.lambdas),
        seeds=list(exp.seeds),
        validation_size=exp.validation_size,
        prep=exp.prep,
        strength=exp.strength,
        spec_hash=config_hash(cfg),
    )


def with_lambda(cfg: GlobalConfig, lambda_penalty: float) -> GlobalConfig:
    return dataclasses.replace(cfg, reward=dataclasses.replace(cfg.reward, lambda_penalty=lambda_penalty))


def strength_of(cfg: GlobalConfig) -> MeasurementStrength:
    return MeasurementStrength(cfg.experiment.strength)


def prep_of(cfg: GlobalConfig, prep: Optional[str] = None) -> InitialStatePrep:
    """Explicit preparation, else the configured one, else thermal equilibrium."""
    return InitialStatePrep(prep or cfg.experiment.prep or InitialStatePrep.EQUILIBRIUM.value)


def make_env(cfg: GlobalConfig, rng: np.random.Generator) -> QubitEnvironment:
    return QubitEnvironment(cfg.env, rng, strength_of(cfg), cfg.network.n_actions)


def calibrate(cfg: GlobalConfig, rng: np.random.Generator) -> ReadoutCalibration:
    return calibrate_readout(make_env(cfg, rng), cfg.readout, strength_of(cfg))


def to_eval_metrics(
    metrics: ValidationMetrics, prep: InitialStatePrep, mean_return: Optional[float] = None
) -> EvalMetrics:
    return EvalMetrics(**metrics.to_dict(), mean_return=mean_return, prep=prep.value)
