import json
import os
import tempfile
import unittest
from pathlib import Path

import toml
import typer
from typer.testing import CliRunner

from agent.checkpoint import CheckpointError
from agent.ppo import NumericalError
from apps.cli.cli import cmd_tool
from apps.cli.exception import (
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_ERROR,
    RunError,
    exit_code_for,
    handle_errors,
)
from apps.cli.models import EvalMetrics, FrontierPoint, RunRecord
from apps.cli.run_store import (
    CURVE_FIELDS,
    create_run_dir,
    read_csv,
    read_record,
    run_dir_name,
    write_csv,
    write_learning_curve,
    write_record,
)
from apps.cli.workers import map_tasks, spawn_seeds
from core.config import ConfigValidationError, build_config
from core.envsim import EnvProtocolError, MeanTraceError
from core.readout import DegenerateWeightsError, FitConvergenceError

ENV = {"LOG_LEVEL": "ERROR", "ENV": "test"}


def json_output(output: str):
    """The JSON document a command echoes after any log lines."""
    lines = output.splitlines()
    start = next(i for i, line in enumerate(lines) if line in ("{", "["))
    return json.loads("\n".join(lines[start:]))


def _add(a, b):
    return a + b


class TestExitCodes(unittest.TestCase):
    def test_mapping(self):
        self.assertEqual(exit_code_for(ConfigValidationError("bad", field="env.t1_e")), EXIT_CONFIG_ERROR)
        self.assertEqual(exit_code_for(CheckpointError("bad")), EXIT_CONFIG_ERROR)
        self.assertEqual(exit_code_for(NumericalError("nan")), EXIT_NUMERICAL_ERROR)
        self.assertEqual(exit_code_for(FitConvergenceError("stuck")), EXIT_NUMERICAL_ERROR)
        self.assertEqual(exit_code_for(RunError("custom", exit_code=5)), 5)
        self.assertEqual(exit_code_for(KeyError("x")), 1)

    def test_simulator_and_readout_errors(self):
        self.assertEqual(exit_code_for(EnvProtocolError("gf-flip on a qubit")), EXIT_CONFIG_ERROR)
        self.assertEqual(exit_code_for(MeanTraceError("too short")), EXIT_CONFIG_ERROR)
        self.assertEqual(exit_code_for(DegenerateWeightsError("no contrast")), EXIT_NUMERICAL_ERROR)

        for exc, code in (
            (MeanTraceError("too short"), EXIT_CONFIG_ERROR),
            (DegenerateWeightsError("no contrast"), EXIT_NUMERICAL_ERROR),
        ):

            @handle_errors
            def command():
                raise exc

            with self.assertRaises(typer.Exit) as ctx:
                command()
            self.assertEqual(ctx.exception.exit_code, code)


class TestRunStore(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.cfg = build_config({})

    def tearDown(self):
        self.tmp.cleanup()

    def test_run_dir_layout(self):
        name = run_dir_name(self.cfg, 4)
        self.assertTrue(name.startswith("strong-qubit-"))
        self.assertTrue(name.endswith("-seed4"))
        self.assertEqual(len(name.split("-")[2]), 12)
        run_dir = create_run_dir(self.root, self.cfg, 4)
        self.assertTrue((run_dir / "checkpoints").is_dir())
        self.assertTrue((run_dir / "config.toml").exists())

    def test_csv_round_trip_keeps_numbers_and_blanks(self):
        rows = [{"step": 1, "error": 0.125, "entropy": None}, {"step": 2, "error": 1e-3}]
        path = write_learning_curve(self.root / "learning_curve.csv", rows)
        loaded = read_csv(path)
        self.assertEqual(list(loaded[0]), CURVE_FIELDS)
        self.assertEqual(loaded[0]["step"], 1)
        self.assertEqual(loaded[1]["error"], 1e-3)
        self.assertIsNone(loaded[0]["entropy"])

    def test_frontier_points_round_trip(self):
        points = [FrontierPoint(source="threshold", parameter=0.5, mean_cycles=1.5, error=0.02)]
        path = write_csv(self.root / "frontier.csv", [p.to_dict() for p in points], list(FrontierPoint.model_fields))
        row = read_csv(path)[0]
        self.assertEqual(row["source"], "threshold")
        self.assertEqual(row["mean_cycles"], 1.5)
        self.assertIsNone(row["seed"])

    def test_record_round_trip(self):
        metrics = EvalMetrics(
            n_episodes=10,
            error=0.1,
            mean_cycles=2.0,
            std_cycles=0.5,
            forced_fraction=0.0,
            action_frequencies={"TERMINATE": 0.5, "IDLE": 0.2, "FLIP": 0.3},
            rethermalization_floor=0.0007,
            latent_error=0.05,
        )
        record = RunRecord(
            spec_hash="ab" * 32,
            scenario="strong-qubit",
            seed=0,
            lambda_penalty=0.02,
            started_at="2024-01-01T00:00:00",
            run_dir=str(self.root),
            metrics=metrics,
        )
        path = write_record(self.root / "record.json", record)
        self.assertEqual(read_record(path, RunRecord), record)


class TestWorkers(unittest.TestCase):
    def test_inline_map_keeps_order(self):
        self.assertEqual(map_tasks(_add, [(1, 2), (3, 4), (5, 6)]), [3, 7, 11])

    def test_spawned_seeds_are_reproducible(self):
        a = [s.generate_state(1)[0] for s in spawn_seeds(3, 4)]
        b = [s.generate_state(1)[0] for s in spawn_seeds(3, 4)]
        self.assertEqual(a, b)
        self.assertEqual(len(set(a)), 4)


class TestCli(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.config = str(self.root / "config.toml")
        self.runner = CliRunner()

    def tearDown(self):
        self.tmp.cleanup()

    def invoke(self, *args):
        return self.runner.invoke(
            cmd_tool, ["-c", self.config, "-o", str(self.root / "runs"), *args], env=ENV
        )

    def test_latency_ledger(self):
        saved = self.root / "latency.json"
        result = self.invoke("latency", "--save", str(saved))
        self.assertEqual(result.exit_code, 0, result.output)
        ledger = json.loads(saved.read_text())
        self.assertEqual(ledger["total_loop_ns"], 451.0)
        self.assertEqual(ledger["total_nn_ns"], 48.0)
        self.assertEqual(json_output(result.output), ledger)

    def test_dry_run_resolves_the_experiment(self):
        result = self.invoke("--seed", "5", "train", "--dry-run", "--lambda", "0.1")
        self.assertEqual(result.exit_code, 0, result.output)
        data = json_output(result.output)
        self.assertEqual(data["spec"]["scenario"], "strong-qubit")
        self.assertEqual(data["spec"]["reward"]["lambda_penalty"], 0.1)
        self.assertEqual(len(data["run_dirs"]), 1)
        self.assertTrue(data["run_dirs"][0].endswith("-seed5"))
        self.assertFalse((self.root / "runs").exists())

    def test_unknown_scenario_is_a_config_error(self):
        result = self.invoke("-s", "ququart", "latency")
        self.assertEqual(result.exit_code, EXIT_CONFIG_ERROR)

    def test_invalid_value_is_a_config_error(self):
        with open(self.config, "w", encoding="utf-8") as f:
            toml.dump({"env": {"p_therm": 0.9}}, f)
        result = self.invoke("latency")
        self.assertEqual(result.exit_code, EXIT_CONFIG_ERROR)

    def test_classifier_scenario_cannot_be_trained(self):
        result = self.invoke("-s", "discrimination", "train", "--dry-run")
        self.assertEqual(result.exit_code, EXIT_CONFIG_ERROR)

    def test_fit_readout_writes_calibration(self):
        with open(self.config, "w", encoding="utf-8") as f:
            toml.dump({"readout": {"calibration_shots": 2000, "bootstrap_resamples": 10}}, f)
        result = self.invoke("fit-readout")
        self.assertEqual(result.exit_code, 0, result.output)
        summary = json_output(result.output)
        self.assertEqual(summary["levels"], ["G", "E"])
        self.assertLess(summary["infidelity"], 0.05)
        self.assertTrue(os.path.exists(self.root / "runs" / "calibration.json"))

    def test_simulate_traces(self):
        result = self.invoke("simulate-traces", "--n", "8")
        self.assertEqual(result.exit_code, 0, result.output)
        written = json_output(result.output)
        self.assertEqual([Path(p).name for p in written], ["mean_traces.csv", "traces.csv"])


if __name__ == "__main__":
    unittest.main()
