"""Named experiment scenarios and the settings each one pins down."""

import dataclasses
from dataclasses import dataclass
from typing import Optional

from core.models.config import GlobalConfig


@dataclass(frozen=True)
class Scenario:
    name: str
    levels: int
    n_actions: int
    memory_depth: int
    strength: str
    prep: Optional[str]


SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("strong-qubit", 2, 3, 0, "strong", "equilibrium"),
        Scenario("weak-qubit-l0", 2, 3, 0, "weak", "qubit_mixed"),
        Scenario("weak-qubit-l2", 2, 3, 2, "weak", "qubit_mixed"),
        Scenario("qutrit-4action", 3, 4, 0, "strong", "qutrit_mixed"),
        Scenario("qutrit-3action", 3, 3, 0, "strong", "qutrit_mixed"),
        Scenario("discrimination", 2, 2, 0, "strong", None),
    )
}


def get_scenario(name: str) -> Scenario:
    from core.config.loader import ConfigValidationError

    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigValidationError(
            f"Unknown scenario '{name}'. Must be one of: {sorted(SCENARIOS)}",
            field="experiment.scenario",
        )


def apply_scenario(cfg: GlobalConfig, name: Optional[str] = None) -> GlobalConfig:
    """Return a copy of `cfg` with the fields fixed by the scenario filled in.

    An explicitly configured preparation is kept.
    """
    scenario = get_scenario(name or cfg.experiment.scenario)
    return dataclasses.replace(
        cfg,
        env=dataclasses.replace(cfg.env, levels=scenario.levels),
        network=dataclasses.replace(
            cfg.network, n_actions=scenario.n_actions, memory_depth=scenario.memory_depth
        ),
        experiment=dataclasses.replace(
            cfg.experiment,
            scenario=scenario.name,
            strength=scenario.strength,
            prep=cfg.experiment.prep or scenario.prep,
        ),
    )
