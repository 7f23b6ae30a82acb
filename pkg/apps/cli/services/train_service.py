"""Single training runs: calibrate, train, checkpoint, validate, record."""

import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np

from agent.policy import NetworkPolicy
from agent.evaluation import evaluate_policy
from agent.ppo import CurvePoint, PpoTrainer
from core.config import validate_global_config
from core.models.config import GlobalConfig

from ..exception import RunError
from ..models import ExperimentSpec, RunRecord
from ..run_store import create_run_dir, write_json, write_learning_curve, write_record
from .common import calibrate, experiment_spec, make_env, prep_of, strength_of, to_eval_metrics, with_lambda

logger = logging.getLogger(__name__)


def plan_training(cfg: GlobalConfig, lambda_penalty: Optional[float] = None) -> ExperimentSpec:
    """Resolve and validate without running anything."""
    if cfg.network.n_actions < 3:
        raise RunError(f"scenario {cfg.experiment.scenario} has no reset agent to train")
    if lambda_penalty is not None:
        cfg = with_lambda(cfg, lambda_penalty)
    validate_global_config(cfg)
    return experiment_spec(cfg)


def run_training(
    cfg: GlobalConfig,
    seed: int,
    out: str | Path,
    lambda_penalty: Optional[float] = None,
) -> RunRecord:
    """One PPO run for one seed and one lambda.

    Everything random descends from `seed`: calibration, collection and
    final validation each get their own child stream.
    """
    spec = plan_training(cfg, lambda_penalty)
    if lambda_penalty is not None:
        cfg = with_lambda(cfg, lambda_penalty)
    started = datetime.now()
    run_dir = create_run_dir(out, cfg, seed)
    write_json(run_dir / "spec.json", spec.to_dict())

    cal_rng, train_rng, env_rng, policy_rng, boot_rng = np.random.default_rng(seed).spawn(5)
    calibration = calibrate(cfg, cal_rng)
    write_json(run_dir / "calibration.json", calibration.to_dict())
    rc = calibration.reward_config(cfg.reward.lambda_penalty)
    prep = prep_of(cfg)

    curve: list[CurvePoint] = []
    curve_path = run_dir / "learning_curve.csv"

    def on_step(point: CurvePoint) -> None:
        curve.append(point)
        write_learning_curve(curve_path, [p.to_dict() for p in curve])

    trainer = PpoTrainer(
        cfg.env, cfg.network, cfg.ppo, rc, calibration, train_rng, prep, strength_of(cfg)
    )
    result = trainer.train(run_dir / "checkpoints", on_step)
    write_learning_curve(curve_path, [p.to_dict() for p in result.curve])

    agent = NetworkPolicy(result.params, policy_rng, greedy=not cfg.ppo.stochastic_validation)
    metrics = evaluate_policy(
        make_env(cfg, env_rng), agent, calibration, cfg.experiment.validation_size, prep,
        boot_rng, cfg.readout.bootstrap_resamples,
    )
    record = RunRecord(
        spec_hash=spec.spec_hash,
        scenario=cfg.experiment.scenario,
        seed=seed,
        lambda_penalty=cfg.reward.lambda_penalty,
        started_at=started,
        finished_at=datetime.now(),
        run_dir=str(run_dir),
        learning_curve=str(curve_path),
        checkpoints=[str(p) for p in result.checkpoints],
        episodes_seen=result.episodes_seen,
        metrics=to_eval_metrics(metrics, prep),
    )
    write_record(run_dir / "record.json", record)
    logger.info(
        "Run %s finished: 1-P_g = %.4f, <n> = %.3f after %d episodes",
        run_dir.name, metrics.error, metrics.mean_cycles, result.episodes_seen,
    )
    return record
