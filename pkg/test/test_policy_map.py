import json
import os
import tempfile
import unittest

import numpy as np

from agent.baseline import ThresholdAgent, default_threshold_policy
from agent.policy import OraclePolicy
from core.analysis import MapAxes, PolicyMap, build_policy_map
from core.envsim import QubitEnvironment
from core.models.config import EnvConfig, ReadoutConfig
from core.models.quantum import Action, InitialStatePrep
from core.readout import calibrate_readout
from test.helpers import constant_policy


class PolicyMapTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cfg = EnvConfig(readout_len=64, max_cycles=3)
        env = QubitEnvironment(cfg, np.random.default_rng(0))
        cls.calibration = calibrate_readout(env, ReadoutConfig(calibration_shots=2000))
        cls.agent = ThresholdAgent(default_threshold_policy(cls.calibration), cls.calibration)
        cls.episodes = [env.run_episode(cls.agent, InitialStatePrep.QUBIT_MIXED) for _ in range(300)]

    def test_threshold_map_switches_at_the_midpoint(self):
        pm = build_policy_map(self.agent.probabilities, self.episodes, self.calibration, bins=41)
        self.assertEqual(pm.probabilities.shape, (41, 3))
        centers = 0.5 * (pm.edges[0][1:] + pm.edges[0][:-1])
        visited = ~pm.empty
        below = visited & (centers < self.calibration.threshold - 0.1)
        above = visited & (centers > self.calibration.threshold + 0.1)
        self.assertTrue(below.any() and above.any())
        np.testing.assert_allclose(pm.probabilities[below, int(Action.TERMINATE)], 1.0)
        np.testing.assert_allclose(pm.probabilities[above, int(Action.FLIP)], 1.0)

    def test_empty_bins_are_nan(self):
        pm = build_policy_map(self.agent.probabilities, self.episodes, self.calibration, bins=41)
        self.assertTrue(np.all(np.isnan(pm.probabilities[pm.empty])))
        self.assertFalse(np.any(np.isnan(pm.probabilities[~pm.empty])))
        total = sum(ep.n_cycles for ep in self.episodes)
        self.assertEqual(int(pm.counts.sum()) + pm.outside, total)

    def test_centering_moves_the_threshold_to_zero(self):
        pm = build_policy_map(self.agent.probabilities, self.episodes, self.calibration, center=True)
        self.assertAlmostEqual(pm.offsets[0], self.calibration.threshold)
        plain = build_policy_map(self.agent.probabilities, self.episodes, self.calibration)
        np.testing.assert_allclose(pm.edges[0] + pm.offsets[0], plain.edges[0])
        np.testing.assert_array_equal(pm.counts, plain.counts)

    def test_previous_cycle_axes(self):
        pm = build_policy_map(
            self.agent.probabilities, self.episodes, self.calibration, MapAxes.U_PREV, bins=11
        )
        self.assertEqual(pm.counts.shape, (11, 11))
        later_cycles = sum(max(ep.n_cycles - 1, 0) for ep in self.episodes)
        self.assertEqual(int(pm.counts.sum()) + pm.outside, later_cycles)

    def test_uw_axes_need_two_dimensional_calibration(self):
        with self.assertRaises(ValueError):
            build_policy_map(self.agent.probabilities, self.episodes, self.calibration, MapAxes.UW)

    def test_empty_probe_set(self):
        with self.assertRaises(ValueError):
            build_policy_map(self.agent.probabilities, [], self.calibration)

    def test_save_and_reload(self):
        pm = build_policy_map(OraclePolicy(3).probabilities, self.episodes, self.calibration, bins=21)
        with tempfile.TemporaryDirectory() as tmp:
            csv_path, json_path = pm.save(tmp, "oracle")
            self.assertTrue(os.path.exists(csv_path))
            with open(json_path, encoding="utf-8") as f:
                restored = PolicyMap.from_dict(json.load(f))
        np.testing.assert_array_equal(restored.counts, pm.counts)
        np.testing.assert_array_equal(np.isnan(restored.probabilities), np.isnan(pm.probabilities))
        self.assertEqual(restored.action_names, ["terminate", "idle", "flip"])


class QutritMapTest(unittest.TestCase):
    def test_uw_map(self):
        cfg = EnvConfig(readout_len=64, levels=3, max_cycles=2)
        env = QubitEnvironment(cfg, np.random.default_rng(1), n_actions=4)
        calibration = calibrate_readout(env, ReadoutConfig(calibration_shots=1500))
        episodes = [
            env.run_episode(constant_policy(Action.TERMINATE), InitialStatePrep.QUTRIT_MIXED)
            for _ in range(100)
        ]
        pm = build_policy_map(
            OraclePolicy(4).probabilities, episodes, calibration, MapAxes.UW, bins=15, center=True
        )
        self.assertEqual(pm.probabilities.shape, (15, 15, 4))
        self.assertEqual(len(pm.offsets), 2)
        self.assertEqual(len(pm.overlay["components"]), 3)


if __name__ == "__main__":
    unittest.main()
