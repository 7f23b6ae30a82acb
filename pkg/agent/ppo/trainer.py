"""Batch loop: collect episodes, reward them, estimate advantages, update.

Collection always runs on the parameters published after the previous
update, so step k+1 sees exactly the policy produced by step k.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from core.config import ConfigValidationError, validate_ppo_config, validate_reward_config
from core.envsim import QubitEnvironment
from core.models.config import EnvConfig, NetTopology, PpoHyperparams, ReadoutConfig, RewardConfig
from core.models.quantum import Episode, InitialStatePrep, MeasurementStrength
from core.readout import ReadoutCalibration, calibrate_readout

from ..checkpoint import save_checkpoint
from ..evaluation import ValidationMetrics, evaluate_policy
from ..network import LowLatencyPolicy, PolicyParams
from ..param_store import ParamStore
from ..policy import DecisionRecord, NetworkPolicy
from .advantages import gae_advantages
from .buffer import TransitionBatch
from .critic import CriticNet
from .rewards import compute_rewards
from .update import PpoDiagnostics, make_optimizer, ppo_update

logger = logging.getLogger(__name__)


@dataclass
class CurvePoint:
    step: int
    episodes_seen: int
    reward_mean: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    mean_cycles: float
    forced_fraction: float
    error: Optional[float] = None
    val_mean_cycles: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainingResult:
    params: PolicyParams
    curve: list[CurvePoint] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)

    @property
    def episodes_seen(self) -> int:
        return self.curve[-1].episodes_seen if self.curve else 0


class PpoTrainer:
    def __init__(
        self,
        env_cfg: EnvConfig,
        topology: NetTopology,
        hp: PpoHyperparams,
        rc: RewardConfig,
        calibration: ReadoutCalibration,
        rng: np.random.Generator,
        prep: InitialStatePrep = InitialStatePrep.EQUILIBRIUM,
        strength: MeasurementStrength = MeasurementStrength.STRONG,
    ):
        validate_ppo_config(hp)
        validate_reward_config(rc)
        if rc.u_g is None or rc.u_e is None:
            raise ConfigValidationError("reward references are not calibrated", field="reward.u_g")
        self.hp = hp
        self.rc = rc
        self.topology = topology
        self.calibration = calibration
        self.prep = InitialStatePrep(prep)

        # independent streams: collection, validation, network init, minibatch order
        env_rng, val_rng, init_rng, self._rng = rng.spawn(4)
        self.env = QubitEnvironment(env_cfg, env_rng, strength, topology.n_actions)
        self.val_env = QubitEnvironment(env_cfg, val_rng, strength, topology.n_actions)

        self.policy = LowLatencyPolicy(topology)
        self.policy.load_params(PolicyParams.init(topology, init_rng))
        self.critic = CriticNet(topology, hp.critic_width, hp.critic_layers)
        self.critic.reset_parameters(init_rng)
        self.optimizer = make_optimizer(self.policy, self.critic, hp)
        self.store = ParamStore(self.policy.export_params())
        self.episodes_seen = 0
        self.step_count = 0

    def collect_batch(self) -> tuple[TransitionBatch, list[Episode]]:
        """Whole episodes until at least `batch_measurements` cycles are recorded."""
        agent = NetworkPolicy(self.store.get(), self._rng, record=True)
        episodes: list[Episode] = []
        records: list[list[DecisionRecord]] = []
        rewards: list[np.ndarray] = []
        n_cycles = 0
        while n_cycles < self.hp.batch_measurements:
            episode = self.env.run_episode(agent, self.prep)
            episode.rewards = compute_rewards(episode, self.rc, self.calibration.weights_u)
            episodes.append(episode)
            records.append(agent.drain())
            rewards.append(episode.rewards)
            n_cycles += episode.n_cycles

        observations = np.stack([r.observation for rec in records for r in rec])
        batch = TransitionBatch.from_episodes(records, rewards, self.critic.values(observations))
        batch.advantages, batch.returns = gae_advantages(
            batch.rewards, batch.values, batch.dones, self.hp.gamma, self.hp.gae_lambda
        )
        return batch, episodes

    def validate(self, n_episodes: Optional[int] = None) -> ValidationMetrics:
        agent = NetworkPolicy(
            self.store.get(), self._rng, greedy=not self.hp.stochastic_validation
        )
        return evaluate_policy(
            self.val_env, agent, self.calibration,
            n_episodes or self.hp.validation_episodes, self.prep,
        )

    def step(self) -> tuple[CurvePoint, PpoDiagnostics]:
        batch, episodes = self.collect_batch()
        diagnostics = ppo_update(self.policy, self.critic, self.optimizer, batch, self.hp, self._rng)
        self.store.publish(self.policy.export_params())
        self.step_count += 1
        self.episodes_seen += len(episodes)
        point = CurvePoint(
            step=self.step_count,
            episodes_seen=self.episodes_seen,
            reward_mean=float(batch.episode_returns().mean()),
            entropy=diagnostics.entropy,
            clip_fraction=diagnostics.clip_fraction,
            approx_kl=diagnostics.approx_kl,
            mean_cycles=float(np.mean([ep.n_cycles for ep in episodes])),
            forced_fraction=float(np.mean([ep.forced_termination for ep in episodes])),
        )
        logger.info(
            "step %d: episodes=%d reward=%.4f entropy=%.4f clip=%.3f <n>=%.3f",
            point.step, point.episodes_seen, point.reward_mean, point.entropy,
            point.clip_fraction, point.mean_cycles,
        )
        return point, diagnostics

    def train(
        self,
        checkpoint_dir: Optional[Path] = None,
        on_step: Optional[Callable[[CurvePoint], None]] = None,
    ) -> TrainingResult:
        hp = self.hp
        result = TrainingResult(self.store.get())
        for _ in range(hp.training_steps):
            point, _ = self.step()
            if hp.validate_every and point.step % hp.validate_every == 0:
                metrics = self.validate()
                point.error = metrics.error
                point.val_mean_cycles = metrics.mean_cycles
            result.curve.append(point)
            if on_step is not None:
                on_step(point)
            if checkpoint_dir is not None and hp.checkpoint_every and point.step % hp.checkpoint_every == 0:
                result.checkpoints.append(self.checkpoint(checkpoint_dir))
            if hp.max_training_episodes is not None and self.episodes_seen >= hp.max_training_episodes:
                logger.info("Reached %d training episodes, stopping", self.episodes_seen)
                break

        saved_last = bool(result.checkpoints) and result.checkpoints[-1].stem == f"step_{self.step_count:04d}"
        if checkpoint_dir is not None and not saved_last:
            result.checkpoints.append(self.checkpoint(checkpoint_dir))
        result.params = self.store.get()
        return result

    def checkpoint(self, directory: Path) -> Path:
        return save_checkpoint(
            Path(directory) / f"step_{self.step_count:04d}.json",
            self.store.get(),
            step=self.step_count,
            extra={"episodes_seen": self.episodes_seen, "prep": self.prep.value},
        )


def train(
    env_cfg: EnvConfig,
    topology: NetTopology,
    hp: PpoHyperparams,
    rc: RewardConfig,
    rng: np.random.Generator,
    calibration: Optional[ReadoutCalibration] = None,
    prep: InitialStatePrep = InitialStatePrep.EQUILIBRIUM,
    strength: MeasurementStrength = MeasurementStrength.STRONG,
    readout_cfg: Optional[ReadoutConfig] = None,
    checkpoint_dir: Optional[Path] = None,
    on_step: Optional[Callable[[CurvePoint], None]] = None,
) -> TrainingResult:
    """Calibrate the readout if needed, then run the PPO loop.

    Reward references missing from `rc` are frozen from the calibration.
    """
    cal_rng, train_rng = rng.spawn(2)
    if calibration is None:
        cal_env = QubitEnvironment(env_cfg, cal_rng, strength, topology.n_actions)
        calibration = calibrate_readout(cal_env, readout_cfg, strength)
    if rc.u_g is None or rc.u_e is None:
        rc = calibration.reward_config(rc.lambda_penalty)
    trainer = PpoTrainer(env_cfg, topology, hp, rc, calibration, train_rng, prep, strength)
    return trainer.train(checkpoint_dir, on_step)
