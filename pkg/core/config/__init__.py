from .loader import (
    ConfigValidationError,
    build_config,
    get_config,
    get_config_path,
    load_config,
    reload_config,
    validate_config,
    validate_discrimination_config,
    validate_env_config,
    validate_experiment,
    validate_global_config,
    validate_ppo_config,
    validate_reward_config,
    validate_topology,
)
from .scenarios import SCENARIOS, Scenario, apply_scenario, get_scenario
from .utils import (
    config_hash,
    config_to_dict,
    create_default_config,
    get_config_summary,
    validate_config_file_exists,
    write_config,
)

__all__ = [
    # Configuration loading and management
    "get_config",
    "load_config",
    "reload_config",
    "build_config",
    "ConfigValidationError",
    "get_config_path",
    "validate_config",
    # Section validators
    "validate_env_config",
    "validate_topology",
    "validate_reward_config",
    "validate_ppo_config",
    "validate_discrimination_config",
    "validate_experiment",
    "validate_global_config",
    # Scenarios
    "SCENARIOS",
    "Scenario",
    "apply_scenario",
    "get_scenario",
    # Configuration utilities
    "validate_config_file_exists",
    "get_config_summary",
    "create_default_config",
    "config_to_dict",
    "config_hash",
    "write_config",
]
