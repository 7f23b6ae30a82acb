import dataclasses
import os
import tempfile
import unittest

import toml

from core.config import (
    SCENARIOS,
    ConfigValidationError,
    apply_scenario,
    build_config,
    config_hash,
    create_default_config,
    load_config,
    validate_global_config,
    write_config,
)
from core.models.config import GlobalConfig


class TestBuildConfig(unittest.TestCase):
    def test_empty_file_resolves_the_default_scenario(self):
        cfg = build_config({})
        self.assertEqual(cfg.experiment.scenario, "strong-qubit")
        self.assertEqual(cfg.env.levels, 2)
        self.assertEqual(cfg.network.n_actions, 3)
        self.assertEqual(cfg.experiment.prep, "equilibrium")

    def test_every_scenario_builds(self):
        for name, scenario in SCENARIOS.items():
            with self.subTest(scenario=name):
                cfg = build_config({"experiment": {"scenario": name}})
                self.assertEqual(cfg.env.levels, scenario.levels)
                self.assertEqual(cfg.network.n_actions, scenario.n_actions)
                self.assertEqual(cfg.network.memory_depth, scenario.memory_depth)
                self.assertEqual(cfg.experiment.strength, scenario.strength)

    def test_explicit_prep_survives_the_scenario(self):
        cfg = build_config({"experiment": {"scenario": "strong-qubit", "prep": "inverted"}})
        self.assertEqual(cfg.experiment.prep, "inverted")

    def test_conflicting_pinned_field_names_the_key(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            build_config({"experiment": {"scenario": "qutrit-4action"}, "env": {"levels": 2}})
        self.assertEqual(ctx.exception.field, "env.levels")

    def test_unknown_scenario(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            build_config({"experiment": {"scenario": "ququart"}})
        self.assertEqual(ctx.exception.field, "experiment.scenario")

    def test_out_of_range_values(self):
        cases = [
            ({"env": {"p_therm": 0.7}}, "env.p_therm"),
            ({"env": {"t1_e": 0.0}}, "env.t1_e"),
            ({"ppo": {"gamma": 1.5}}, "ppo.gamma"),
            ({"reward": {"lambda_penalty": -0.1}}, "reward.lambda_penalty"),
            ({"network": {"inputs_per_layer": 3}}, "network.inputs_per_layer"),
            ({"network": {"readout_len": 100}}, "network.readout_len"),
            ({"experiment": {"prep": "second_excited"}}, "env.levels"),
            ({"discrimination": {"taus": [3e-6]}}, "discrimination.taus"),
        ]
        for raw, field in cases:
            with self.subTest(field=field):
                with self.assertRaises(ConfigValidationError) as ctx:
                    build_config(raw)
                self.assertEqual(ctx.exception.field, field)

    def test_taus_are_sorted(self):
        cfg = build_config({"discrimination": {"taus": [2e-7, 5e-8, 1e-7]}})
        self.assertEqual(cfg.discrimination.taus, [5e-8, 1e-7, 2e-7])

    def test_infinite_grad_clip_survives_toml(self):
        cfg = build_config(toml.loads(toml.dumps(create_default_config())))
        self.assertEqual(cfg.ppo.grad_clip, float("inf"))


class TestDefaultTemplate(unittest.TestCase):
    def test_template_leaves_scenario_fields_open(self):
        template = create_default_config()
        self.assertNotIn("levels", template["env"])
        self.assertNotIn("n_actions", template["network"])
        self.assertNotIn("strength", template["experiment"])

    def test_template_works_for_another_scenario(self):
        template = create_default_config()
        template["experiment"]["scenario"] = "weak-qubit-l2"
        cfg = build_config(template)
        self.assertEqual(cfg.network.memory_depth, 2)
        self.assertEqual(cfg.experiment.strength, "weak")


class TestConfigHash(unittest.TestCase):
    def test_hash_is_stable_and_sensitive(self):
        a, b = build_config({}), build_config({})
        self.assertEqual(config_hash(a), config_hash(b))
        self.assertEqual(len(config_hash(a)), 64)
        changed = dataclasses.replace(
            a, reward=dataclasses.replace(a.reward, lambda_penalty=0.5)
        )
        self.assertNotEqual(config_hash(a), config_hash(changed))

    def test_apply_scenario_matches_build(self):
        built = build_config({"experiment": {"scenario": "qutrit-3action"}})
        applied = apply_scenario(GlobalConfig(), "qutrit-3action")
        validate_global_config(applied)
        self.assertEqual(config_hash(built), config_hash(applied))


class TestLoadConfig(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "config.toml")

    def tearDown(self):
        self.tmp.cleanup()

    def test_missing_file_gets_a_default(self):
        cfg = load_config(reload=True, use_env_overrides=False, path=self.path)
        self.assertTrue(os.path.exists(self.path))
        self.assertEqual(cfg.experiment.scenario, "strong-qubit")

    def test_scenario_argument_overrides_the_file(self):
        cfg = load_config(
            reload=True, use_env_overrides=False, path=self.path, scenario="weak-qubit-l0"
        )
        self.assertEqual(cfg.experiment.strength, "weak")

    def test_written_config_reloads_identically(self):
        cfg = build_config({"experiment": {"scenario": "qutrit-4action"}})
        write_config(cfg, self.path)
        reloaded = load_config(reload=True, use_env_overrides=False, path=self.path)
        self.assertEqual(config_hash(cfg), config_hash(reloaded))

    def test_environment_overrides(self):
        os.environ["FASTRESET_SEED"] = "7"
        os.environ["FASTRESET_LAMBDA"] = "0.1"
        try:
            cfg = load_config(reload=True, path=self.path)
        finally:
            del os.environ["FASTRESET_SEED"]
            del os.environ["FASTRESET_LAMBDA"]
        self.assertEqual(cfg.experiment.seeds, [7])
        self.assertEqual(cfg.reward.lambda_penalty, 0.1)
        self.assertEqual(cfg.experiment.lambdas, [0.1])

    def test_invalid_toml(self):
        with open(self.path, "w", encoding="utf-8") as f:
            f.write("[env\nt1_e = ")
        with self.assertRaises(ConfigValidationError):
            load_config(reload=True, use_env_overrides=False, path=self.path)


if __name__ == "__main__":
    unittest.main()
