from .advantages import gae_advantages, normalize_advantages
from .buffer import TransitionBatch
from .critic import CriticNet
from .rewards import MissingVerificationError, compute_rewards, episode_signals
from .trainer import CurvePoint, PpoTrainer, TrainingResult, train
from .update import (
    NumericalError,
    PpoDiagnostics,
    make_optimizer,
    ppo_loss,
    ppo_update,
    surrogate_terms,
)

__all__ = [
    "compute_rewards",
    "episode_signals",
    "MissingVerificationError",
    "gae_advantages",
    "normalize_advantages",
    "CriticNet",
    "TransitionBatch",
    "ppo_update",
    "ppo_loss",
    "surrogate_terms",
    "make_optimizer",
    "PpoDiagnostics",
    "NumericalError",
    "PpoTrainer",
    "TrainingResult",
    "CurvePoint",
    "train",
]
