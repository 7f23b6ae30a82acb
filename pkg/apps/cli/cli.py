import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import typer

from agent.latency import latency_report
from apps.cli.exception import handle_errors
from apps.cli.run_store import run_dir_name, write_json
from apps.cli.services import (
    evaluate,
    fit_readout,
    plan_training,
    run_discrimination,
    run_training,
    simulate_traces,
    sweep_lambda,
)
from apps.cli.services.common import with_lambda
from apps.cli.workers import map_tasks, shutdown_worker_pool
from core.config import SCENARIOS, load_config
from core.models.config import GlobalConfig

logger = logging.getLogger(__name__)

cmd_tool = typer.Typer(help="Simulated real-time qubit reset and readout experiments.")


def setup_logging() -> None:
    level = os.getenv("LOG_LEVEL", "DEBUG" if os.getenv("ENV") == "dev" else "INFO")
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    if os.getenv("ENV") == "dev":
        from dotenv import load_dotenv

        load_dotenv()


@dataclass
class CliState:
    cfg: GlobalConfig
    seed: Optional[int]
    out: Path
    threads: int

    @property
    def seeds(self) -> list[int]:
        return [self.seed] if self.seed is not None else list(self.cfg.experiment.seeds)

    @property
    def first_seed(self) -> int:
        return self.seeds[0]


def _state(ctx: typer.Context) -> CliState:
    return ctx.obj


def _echo(data) -> None:
    typer.echo(json.dumps(data, indent=2, default=str))


@cmd_tool.callback()
@handle_errors
def main(
    ctx: typer.Context,
    config: str = typer.Option("config.toml", "--config", "-c", help="Configuration file"),
    scenario: Optional[str] = typer.Option(
        None, "--scenario", "-s", help=f"One of {', '.join(SCENARIOS)}"
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Run one seed instead of the configured list"),
    out: Path = typer.Option(Path("runs"), "--out", "-o", help="Output directory"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker processes"),
):
    setup_logging()
    cfg = load_config(reload=True, path=config, scenario=scenario)
    ctx.obj = CliState(cfg, seed, out, threads or cfg.experiment.threads)


@cmd_tool.command()
@handle_errors
def train(
    ctx: typer.Context,
    lambda_penalty: Optional[float] = typer.Option(None, "--lambda", help="Override the cycle penalty"),
    dry_run: bool = typer.Option(False, "--dry-run", help="Validate and print the resolved experiment"),
):
    """Train one agent per configured seed."""
    state = _state(ctx)
    spec = plan_training(state.cfg, lambda_penalty)
    if dry_run:
        cfg = state.cfg if lambda_penalty is None else with_lambda(state.cfg, lambda_penalty)
        _echo({"spec": spec.to_dict(), "run_dirs": [run_dir_name(cfg, s) for s in state.seeds]})
        return
    tasks = [(state.cfg, s, str(state.out), lambda_penalty) for s in state.seeds]
    try:
        records = map_tasks(run_training, tasks, state.threads)
    finally:
        shutdown_worker_pool()
    _echo([r.to_dict() for r in records])


@cmd_tool.command("eval")
@handle_errors
def eval_command(
    ctx: typer.Context,
    checkpoint: Optional[Path] = typer.Argument(None, help="Checkpoint JSON of a trained policy"),
    policy: str = typer.Option("checkpoint", "--policy", help="checkpoint, oracle or threshold"),
    episodes: Optional[int] = typer.Option(None, "--episodes", "-n", help="Validation episodes"),
    greedy: bool = typer.Option(False, "--greedy", help="Argmax instead of sampling"),
    prep: Optional[str] = typer.Option(None, "--prep", help="Initial state preparation"),
    center: bool = typer.Option(False, "--center", help="Center the policy map on the decision boundaries"),
    no_map: bool = typer.Option(False, "--no-map", help="Skip the policy map"),
):
    """Evaluate a policy on fresh episodes and write its policy map."""
    state = _state(ctx)
    metrics = evaluate(
        state.cfg, state.first_seed, state.out, policy, checkpoint, episodes, greedy, prep,
        policy_map=not no_map, center_map=center,
    )
    _echo(metrics.to_dict())


@cmd_tool.command("sweep-lambda")
@handle_errors
def sweep_lambda_command(
    ctx: typer.Context,
    lambdas: Optional[List[float]] = typer.Option(None, "--lambda", help="Repeat for several points"),
    no_baseline: bool = typer.Option(False, "--no-baseline", help="Skip the threshold frontier"),
):
    """Error vs cycle-count frontier over cycle penalties."""
    state = _state(ctx)
    path, points = sweep_lambda(
        state.cfg, state.first_seed, state.out, lambdas or None, state.threads, not no_baseline
    )
    _echo({"frontier": str(path), "points": [p.to_dict() for p in points]})


@cmd_tool.command()
@handle_errors
def latency(
    ctx: typer.Context,
    save: Optional[Path] = typer.Option(None, "--save", help="Also write the ledger to this JSON file"),
):
    """Latency ledger of the configured network."""
    cfg = _state(ctx).cfg
    ledger = latency_report(cfg.network, cfg.latency, cfg.env.sample_rate, cfg.env.cycle_time)
    if save is not None:
        write_json(save, ledger.to_dict())
    _echo(ledger.to_dict())


@cmd_tool.command()
@handle_errors
def discriminate(
    ctx: typer.Context,
    traces: Optional[Path] = typer.Option(None, "--traces", exists=True, readable=True, help="Labelled trace CSV"),
    save_traces: bool = typer.Option(False, "--save-traces", help="Keep the simulated traces"),
):
    """Network vs matched-filter infidelity over observation times."""
    state = _state(ctx)
    path, curve = run_discrimination(state.cfg, state.first_seed, state.out, traces, save_traces)
    _echo({"curve": str(path), "rows": curve.rows()})


@cmd_tool.command("simulate-traces")
@handle_errors
def simulate_traces_command(
    ctx: typer.Context,
    n: int = typer.Option(0, "--n", help="Labelled single shots to simulate"),
    duration: Optional[float] = typer.Option(None, "--duration", help="Trace duration in seconds"),
):
    """Write the mean traces and optionally labelled single shots."""
    state = _state(ctx)
    paths = simulate_traces(state.cfg, state.first_seed, state.out, n, duration)
    _echo([str(p) for p in paths])


@cmd_tool.command("fit-readout")
@handle_errors
def fit_readout_command(ctx: typer.Context):
    """Calibrate the readout and print its fidelity."""
    state = _state(ctx)
    _, summary = fit_readout(state.cfg, state.first_seed, state.out)
    _echo(summary)


if __name__ == "__main__":
    cmd_tool()
