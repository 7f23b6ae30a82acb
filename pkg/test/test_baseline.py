import unittest

import numpy as np

from agent.baseline import (
    ThresholdAgent,
    ThresholdPolicy,
    accept_threshold_grid,
    default_threshold_policy,
    threshold_decide,
    threshold_frontier,
)
from agent.evaluation import evaluate_policy, summarize_episodes
from agent.policy import OraclePolicy
from core.config import ConfigValidationError
from core.envsim import QubitEnvironment
from core.models.config import EnvConfig, ReadoutConfig
from core.models.quantum import Action, InitialStatePrep, QuantumLevel
from core.models.readout import MixtureFit
from core.readout import calibrate_readout


class ThresholdDecisionTest(unittest.TestCase):
    def test_three_regions(self):
        tp = ThresholdPolicy(0.2, 0.6)
        self.assertEqual(threshold_decide(0.1, tp), Action.TERMINATE)
        self.assertEqual(threshold_decide(0.4, tp), Action.IDLE)
        self.assertEqual(threshold_decide(0.7, tp), Action.FLIP)

    def test_equal_thresholds_idle_only_on_the_boundary(self):
        tp = ThresholdPolicy(0.5, 0.5)
        self.assertEqual(threshold_decide(0.5, tp), Action.IDLE)
        self.assertEqual(threshold_decide(0.49, tp), Action.TERMINATE)
        self.assertEqual(threshold_decide(0.51, tp), Action.FLIP)

    def test_crossed_thresholds_are_rejected(self):
        with self.assertRaises(ConfigValidationError):
            ThresholdPolicy(0.7, 0.3)

    def test_f_region(self):
        shape = MixtureFit(
            np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]),
            np.array([np.eye(2) * 0.01] * 3),
            np.ones(3),
        )
        four = ThresholdPolicy(0.5, 0.5, shape, n_actions=4)
        three = ThresholdPolicy(0.5, 0.5, shape, n_actions=3)
        self.assertEqual(threshold_decide(1.0, four, 1.0), Action.GF_FLIP)
        self.assertEqual(threshold_decide(1.0, three, 1.0), Action.IDLE)
        self.assertEqual(threshold_decide(1.0, four, 0.0), Action.FLIP)

    def test_region_needs_two_axes(self):
        shape = MixtureFit(np.array([0.0, 1.0]), np.array([0.01, 0.01]), np.ones(2))
        with self.assertRaises(ConfigValidationError):
            ThresholdPolicy(0.5, 0.5, shape)


class ThresholdAgentTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.cfg = EnvConfig(readout_len=64, max_cycles=4)
        env = QubitEnvironment(cls.cfg, np.random.default_rng(0))
        cls.calibration = calibrate_readout(env, ReadoutConfig(calibration_shots=2000))

    def test_default_policy_sits_at_the_midpoint(self):
        tp = default_threshold_policy(self.calibration)
        self.assertAlmostEqual(tp.accept_threshold, self.calibration.threshold)
        self.assertIsNone(tp.region_shape)

    def test_probabilities_are_one_hot(self):
        agent = ThresholdAgent(default_threshold_policy(self.calibration), self.calibration)
        env = QubitEnvironment(self.cfg, np.random.default_rng(1))
        trace = env.sample_traces(InitialStatePrep.GROUND, 1)[0]
        probs = agent.probabilities(trace, ())
        self.assertEqual(probs.sum(), 1.0)
        self.assertEqual(int(np.argmax(probs)), int(agent(trace, ())))

    def test_threshold_policy_resets_an_inverted_qubit(self):
        env = QubitEnvironment(self.cfg, np.random.default_rng(2))
        agent = ThresholdAgent(default_threshold_policy(self.calibration), self.calibration)
        metrics = evaluate_policy(env, agent, self.calibration, 400, InitialStatePrep.INVERTED)
        self.assertLess(metrics.error, 0.1)
        self.assertGreater(metrics.mean_cycles, 1.0)
        self.assertAlmostEqual(sum(metrics.action_frequencies.values()), 1.0)

    def test_lower_acceptance_costs_cycles(self):
        env = QubitEnvironment(self.cfg, np.random.default_rng(3))
        grid = accept_threshold_grid(self.calibration, n_points=3)
        self.assertAlmostEqual(grid[-1], self.calibration.threshold)
        points = threshold_frontier(env, self.calibration, grid, InitialStatePrep.EQUILIBRIUM, 300)
        self.assertEqual(len(points), 3)
        self.assertGreater(points[0].metrics.mean_cycles, points[-1].metrics.mean_cycles)
        self.assertIn("accept_threshold", points[0].to_dict())


class OracleTest(unittest.TestCase):
    def test_level_actions(self):
        self.assertEqual(OraclePolicy(4).level_action(QuantumLevel.F), Action.GF_FLIP)
        self.assertEqual(OraclePolicy(3).level_action(QuantumLevel.F), Action.IDLE)
        self.assertEqual(OraclePolicy(3).level_action(QuantumLevel.E), Action.FLIP)
        self.assertEqual(OraclePolicy(3).level_action(QuantumLevel.G), Action.TERMINATE)

    def test_oracle_reaches_the_floor(self):
        cfg = EnvConfig(readout_len=64, max_cycles=6)
        env = QubitEnvironment(cfg, np.random.default_rng(4))
        calibration = calibrate_readout(env, ReadoutConfig(calibration_shots=2000))
        episodes = [env.run_episode(OraclePolicy(3), InitialStatePrep.INVERTED) for _ in range(300)]
        metrics = summarize_episodes(episodes, calibration, cfg.rethermalization_floor)
        self.assertLess(metrics.latent_error, 0.03)
        self.assertEqual(metrics.n_episodes, 300)


if __name__ == "__main__":
    unittest.main()
