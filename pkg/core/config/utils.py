"""
Configuration utilities for FastReset.

This module provides utility functions for common configuration operations,
including validation, transformation, and helper methods.
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np
import toml

from core.models.config import GlobalConfig

logger = logging.getLogger(__name__)


def toml_factory(items) -> dict:
    """dict_factory for asdict(): drops None and array fields, writes inf as a string."""
    result = {}
    for key, value in items:
        if value is None or isinstance(value, np.ndarray):
            continue
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        elif isinstance(value, float) and not math.isfinite(value):
            value = str(value)
        result[key] = value
    return result


def config_to_dict(cfg: GlobalConfig) -> Dict[str, Any]:
    return asdict(cfg, dict_factory=toml_factory)


def config_hash(cfg: GlobalConfig) -> str:
    """sha256 of the canonical JSON form of a resolved config."""
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def validate_config_file_exists(config_path: str) -> bool:
    """Validate that the configuration file exists"""
    if not os.path.exists(config_path):
        logger.error(f"Configuration file not found: {config_path}")
        return False
    return True


def get_config_summary(config: Dict[str, Any]) -> Dict[str, Any]:
    """Get a short summary of a raw configuration dict"""
    env = config.get("env", {})
    experiment = config.get("experiment", {})
    network = config.get("network", {})
    return {
        "scenario": experiment.get("scenario"),
        "levels": env.get("levels"),
        "memory_depth": network.get("memory_depth"),
        "lambda": config.get("reward", {}).get("lambda_penalty"),
        "tabulated_traces": bool(env.get("mean_traces_csv")),
    }


SCENARIO_PINNED = (
    ("env", "levels"),
    ("network", "n_actions"),
    ("network", "memory_depth"),
    ("experiment", "strength"),
    ("experiment", "prep"),
)


def create_default_config() -> Dict[str, Any]:
    """Create a default configuration template from the dataclass defaults.

    Fields fixed by the scenario are left out so the template works for any scenario.
    """
    config = config_to_dict(GlobalConfig())
    for section, key in SCENARIO_PINNED:
        config[section].pop(key, None)
    return config


def write_config(cfg: GlobalConfig, path: Optional[str] = None):
    from core.config.loader import get_config_path

    path = path or get_config_path()
    with open(path, "w", encoding="utf-8") as f:
        toml.dump(config_to_dict(cfg), f)
