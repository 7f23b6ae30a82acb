"""Versioned JSON checkpoints with a topology header."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Optional

from core.models.config import NetTopology

from .network import PolicyParams

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "fastreset-policy"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    """Raised for unreadable checkpoints or a topology that does not match."""

    pass


def save_checkpoint(
    path: str | Path,
    params: PolicyParams,
    step: int = 0,
    extra: Optional[dict[str, Any]] = None,
) -> Path:
    """Write atomically: a reader sees either the old or the new file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "step": step,
        "topology": params.topology.to_dict(),
        "params": params.to_dict(),
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(payload, f)
    os.replace(tmp, path)
    logger.debug("Saved checkpoint step %d to %s", step, path)
    return path


def load_checkpoint(
    path: str | Path, expected_topology: Optional[NetTopology] = None
) -> tuple[PolicyParams, dict[str, Any]]:
    """Returns (params, header) where header holds step, topology and extra."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}")

    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a policy checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path} has checkpoint version {payload.get('version')}, expected {CHECKPOINT_VERSION}"
        )

    topology = NetTopology.from_dict(payload["topology"])
    if expected_topology is not None and topology != expected_topology:
        raise CheckpointError(
            f"checkpoint topology {topology.to_dict()} does not match {expected_topology.to_dict()}"
        )
    params = PolicyParams.from_dict(payload["params"])
    header = {k: v for k, v in payload.items() if k != "params"}
    return params, header
