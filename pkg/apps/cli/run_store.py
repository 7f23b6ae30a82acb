"""Run directory layout: <out>/<scenario>-<hash12>-seed<seed>/."""

import csv
import json
import logging
import os
from pathlib import Path
from typing import Any, Sequence, Type, TypeVar

from pydantic import BaseModel

from core.config import config_hash, write_config
from core.models.config import GlobalConfig

logger = logging.getLogger(__name__)

CURVE_FIELDS = [
    "step",
    "episodes_seen",
    "error",
    "val_mean_cycles",
    "reward_mean",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "mean_cycles",
    "forced_fraction",
]

M = TypeVar("M", bound=BaseModel)


def run_dir_name(cfg: GlobalConfig, seed: int, suffix: str = "") -> str:
    name = f"{cfg.experiment.scenario}-{config_hash(cfg)[:12]}-seed{seed}"
    return f"{name}-{suffix}" if suffix else name


def create_run_dir(out: str | Path, cfg: GlobalConfig, seed: int, suffix: str = "") -> Path:
    """Make the run directory and store the resolved config in it."""
    run_dir = Path(out) / run_dir_name(cfg, seed, suffix)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    write_config(cfg, str(run_dir / "config.toml"))
    logger.info("Run directory: %s", run_dir)
    return run_dir


def _cell(value: Any) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(path: str | Path, rows: Sequence[dict], fields: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(fields), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in fields})
    return path


def read_csv(path: str | Path) -> list[dict]:
    """Rows with numbers parsed back; empty cells become None."""
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            parsed = {}
            for key, value in row.items():
                if value == "":
                    parsed[key] = None
                    continue
                try:
                    parsed[key] = int(value)
                except ValueError:
                    try:
                        parsed[key] = float(value)
                    except ValueError:
                        parsed[key] = value
            rows.append(parsed)
    return rows


def write_learning_curve(path: str | Path, points: Sequence[dict]) -> Path:
    return write_csv(path, points, CURVE_FIELDS)


def write_record(path: str | Path, record: BaseModel) -> Path:
    """Atomic JSON write of a pydantic record."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(record.model_dump_json(indent=2))
    os.replace(tmp, path)
    return path


def read_record(path: str | Path, model: Type[M]) -> M:
    with open(path, "r", encoding="utf-8") as f:
        return model.model_validate_json(f.read())


def write_json(path: str | Path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
    return path
