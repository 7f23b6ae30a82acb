"""Clipped-surrogate PPO update of policy and critic."""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import torch

from core.models.config import PpoHyperparams

from ..network import LowLatencyPolicy
from .advantages import normalize_advantages
from .buffer import TransitionBatch
from .critic import CriticNet

logger = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """Raised when a loss or gradient stops being finite; carries the last diagnostics."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class PpoDiagnostics:
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float
    grad_norm: float

    def to_dict(self) -> dict:
        return asdict(self)


def make_optimizer(
    policy: LowLatencyPolicy, critic: CriticNet, hp: PpoHyperparams
) -> torch.optim.Adam:
    """One Adam over policy and critic parameters."""
    return torch.optim.Adam(
        list(policy.parameters()) + list(critic.parameters()),
        lr=hp.adam_lr,
        betas=(hp.adam_beta1, hp.adam_beta2),
    )


def surrogate_terms(
    policy: LowLatencyPolicy,
    obs: torch.Tensor,
    actions: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    cliprange: float,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(clipped surrogate objective, mean entropy, probability ratios)."""
    dist = policy.distribution(obs)
    ratio = torch.exp(dist.log_prob(actions) - old_log_probs)
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - cliprange, 1.0 + cliprange) * advantages
    return torch.min(unclipped, clipped).mean(), dist.entropy().mean(), ratio


def ppo_loss(
    policy: LowLatencyPolicy,
    critic: CriticNet,
    obs: torch.Tensor,
    actions: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    returns: torch.Tensor,
    hp: PpoHyperparams,
) -> tuple[torch.Tensor, dict]:
    surrogate, entropy, ratio = surrogate_terms(
        policy, obs, actions, old_log_probs, advantages, hp.cliprange
    )
    value_loss = torch.mean((critic(obs) - returns) ** 2)
    loss = -surrogate - hp.entropy_coef * entropy + hp.value_coef * value_loss
    with torch.no_grad():
        log_ratio = torch.log(ratio)
        stats = {
            "policy_loss": float(-surrogate),
            "value_loss": float(value_loss),
            "entropy": float(entropy),
            "approx_kl": float(torch.mean((ratio - 1.0) - log_ratio)),
            "clip_fraction": float(torch.mean((torch.abs(ratio - 1.0) > hp.cliprange).double())),
        }
    return loss, stats


def ppo_update(
    policy: LowLatencyPolicy,
    critic: CriticNet,
    optimizer: torch.optim.Optimizer,
    batch: TransitionBatch,
    hp: PpoHyperparams,
    rng: Optional[np.random.Generator] = None,
) -> PpoDiagnostics:
    """`hp.epochs` passes over the batch in `hp.minibatches` slices.

    Updates policy and critic in place. Advantages are taken from the batch
    and normalized over the whole batch when `hp.normalize_advantages` is set.
    """
    if len(batch) == 0:
        raise ValueError("cannot update on an empty batch")
    if batch.advantages is None or batch.returns is None:
        raise ValueError("batch has no advantages; run gae_advantages first")

    advantages = batch.advantages
    if hp.normalize_advantages:
        advantages = normalize_advantages(advantages)

    obs = torch.as_tensor(batch.observations, dtype=torch.float64)
    actions = torch.as_tensor(batch.actions, dtype=torch.int64)
    old_log_probs = torch.as_tensor(batch.log_probs, dtype=torch.float64)
    adv = torch.as_tensor(advantages, dtype=torch.float64)
    returns = torch.as_tensor(batch.returns, dtype=torch.float64)
    params = list(policy.parameters()) + list(critic.parameters())

    stats: dict = {}
    grad_norm = 0.0
    for epoch in range(hp.epochs):
        if hp.minibatches > 1:
            order = rng.permutation(len(batch)) if rng is not None else np.arange(len(batch))
            slices = np.array_split(order, hp.minibatches)
        else:
            slices = [np.arange(len(batch))]
        for idx in slices:
            idx_t = torch.as_tensor(idx, dtype=torch.int64)
            loss, stats = ppo_loss(
                policy, critic, obs[idx_t], actions[idx_t], old_log_probs[idx_t],
                adv[idx_t], returns[idx_t], hp,
            )
            optimizer.zero_grad()
            loss.backward()
            grads = [p.grad for p in params if p.grad is not None]
            norm = torch.sqrt(sum(torch.sum(g**2) for g in grads))
            grad_norm = float(norm)
            if not torch.isfinite(loss) or not np.isfinite(grad_norm):
                raise NumericalError(
                    f"non-finite loss or gradient in epoch {epoch}",
                    {**stats, "loss": float(loss), "grad_norm": grad_norm},
                )
            if np.isfinite(hp.grad_clip):
                torch.nn.utils.clip_grad_norm_(params, hp.grad_clip)
            optimizer.step()

    diagnostics = PpoDiagnostics(grad_norm=grad_norm, **stats)
    logger.debug("PPO update: %s", diagnostics.to_dict())
    return diagnostics
