"""Pydantic records persisted by the command line harness."""

from datetime import datetime
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class RecordModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


class ExperimentSpec(RecordModel):
    """A resolved experiment: scenario plus the config sections it runs with."""

    scenario: str
    env: dict
    topology: dict
    ppo: dict
    reward: dict
    lambdas: list[float]
    seeds: list[int]
    validation_size: int
    prep: Optional[str] = None
    strength: str = "strong"
    spec_hash: str


class EvalMetrics(RecordModel):
    n_episodes: int
    error: float
    error_ci: Optional[tuple[float, float]] = None
    mean_cycles: float
    std_cycles: float
    forced_fraction: float
    action_frequencies: dict[str, float]
    rethermalization_floor: float
    latent_error: float
    populations: list[float] = Field(default_factory=list)
    mean_return: Optional[float] = None
    prep: Optional[str] = None


class RunRecord(RecordModel):
    spec_hash: str
    scenario: str
    seed: int
    lambda_penalty: float
    started_at: datetime
    finished_at: Optional[datetime] = None
    run_dir: str
    learning_curve: Optional[str] = None
    checkpoints: list[str] = Field(default_factory=list)
    episodes_seen: int = 0
    metrics: Optional[EvalMetrics] = None


class FrontierPoint(RecordModel):
    """One point of an error vs cycle-count trade-off."""

    source: str
    parameter: float
    mean_cycles: float
    error: float
    error_low: Optional[float] = None
    error_high: Optional[float] = None
    seed: Optional[int] = None
