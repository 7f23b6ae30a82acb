"""Evaluate a saved policy (or a reference policy) on fresh episodes."""

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from agent.baseline import ThresholdAgent, default_threshold_policy
from agent.checkpoint import load_checkpoint
from agent.evaluation import run_validation_episodes, summarize_episodes
from agent.policy import NetworkPolicy, OraclePolicy
from agent.ppo import compute_rewards
from core.analysis import MapAxes, build_policy_map
from core.models.config import GlobalConfig
from core.readout import ReadoutCalibration

from ..exception import RunError
from ..models import EvalMetrics
from ..run_store import write_json
from .common import calibrate, make_env, prep_of, to_eval_metrics

logger = logging.getLogger(__name__)

POLICY_KINDS = ("checkpoint", "oracle", "threshold")


def map_axes_for(cfg: GlobalConfig, calibration: ReadoutCalibration) -> MapAxes:
    if calibration.ndim == 2:
        return MapAxes.UW
    if cfg.network.memory_depth > 0:
        return MapAxes.U_PREV
    return MapAxes.U


def load_policy(
    cfg: GlobalConfig,
    kind: str,
    calibration: ReadoutCalibration,
    rng: np.random.Generator,
    checkpoint: Optional[str | Path] = None,
    greedy: bool = False,
):
    n_actions = cfg.network.n_actions
    if kind == "oracle":
        return OraclePolicy(n_actions)
    if kind == "threshold":
        return ThresholdAgent(default_threshold_policy(calibration, n_actions), calibration)
    if kind != "checkpoint":
        raise RunError(f"unknown policy '{kind}', expected one of {list(POLICY_KINDS)}")
    if checkpoint is None:
        raise RunError("evaluating a trained policy needs a checkpoint path")
    params, header = load_checkpoint(checkpoint, cfg.network)
    logger.info("Loaded checkpoint %s (step %s)", checkpoint, header.get("step"))
    return NetworkPolicy(params, rng, greedy=greedy)


def evaluate(
    cfg: GlobalConfig,
    seed: int,
    out: str | Path,
    kind: str = "checkpoint",
    checkpoint: Optional[str | Path] = None,
    n_episodes: Optional[int] = None,
    greedy: bool = False,
    prep: Optional[str] = None,
    policy_map: bool = True,
    center_map: bool = False,
) -> EvalMetrics:
    """Metrics of one policy, plus its policy map, written under `out`.

    The return value is the mean telescoped reward per episode with the
    configured lambda.
    """
    if cfg.network.n_actions < 3:
        raise RunError(f"scenario {cfg.experiment.scenario} has no reset policy to evaluate")
    cal_rng, env_rng, policy_rng, boot_rng = np.random.default_rng(seed).spawn(4)
    calibration = calibrate(cfg, cal_rng)
    policy = load_policy(cfg, kind, calibration, policy_rng, checkpoint, greedy)
    initial = prep_of(cfg, prep)
    env = make_env(cfg, env_rng)

    episodes = run_validation_episodes(env, policy, n_episodes or cfg.experiment.validation_size, initial)
    metrics = summarize_episodes(
        episodes, calibration, cfg.env.rethermalization_floor, boot_rng,
        cfg.readout.bootstrap_resamples, n_actions=env.n_actions,
    )
    rc = calibration.reward_config(cfg.reward.lambda_penalty)
    mean_return = float(
        np.mean([compute_rewards(ep, rc, calibration.weights_u).sum() for ep in episodes])
    )
    result = to_eval_metrics(metrics, initial, mean_return)

    out = Path(out)
    write_json(out / f"eval_{kind}.json", result.to_dict())
    if policy_map:
        pm = build_policy_map(
            policy.probabilities, episodes, calibration,
            map_axes_for(cfg, calibration), center=center_map,
        )
        pm.save(out, f"policy_map_{kind}")
    logger.info(
        "Evaluated %s policy on %d episodes: 1-P_g = %.4f, <n> = %.3f",
        kind, metrics.n_episodes, metrics.error, metrics.mean_cycles,
    )
    return result
