"""Reduced-budget training runs checked for their qualitative ordering.

They take minutes, so they only run with FASTRESET_SLOW_TESTS=1.
"""

import os
import unittest

import numpy as np

from agent.baseline import accept_threshold_grid, threshold_frontier
from agent.discriminator import discrimination_curve, simulate_labeled_set
from agent.evaluation import ValidationMetrics, evaluate_policy
from agent.policy import NetworkPolicy, OraclePolicy
from agent.ppo import train
from core.envsim import QubitEnvironment
from core.models.config import (
    DiscriminationConfig,
    EnvConfig,
    NetTopology,
    PpoHyperparams,
    ReadoutConfig,
    RewardConfig,
)
from core.models.quantum import InitialStatePrep, MeasurementStrength
from core.readout import ReadoutCalibration, calibrate_readout

slow = unittest.skipUnless(
    os.getenv("FASTRESET_SLOW_TESTS"), "set FASTRESET_SLOW_TESTS=1 to run the training checks"
)

VALIDATION = 20_000


def training_budget(steps: int = 60) -> PpoHyperparams:
    return PpoHyperparams(training_steps=steps, max_training_episodes=30_000)


def calibrated(env_cfg: EnvConfig, strength: MeasurementStrength, seed: int) -> ReadoutCalibration:
    env = QubitEnvironment(env_cfg, np.random.default_rng(seed), strength)
    return calibrate_readout(env, ReadoutConfig(calibration_shots=10_000), strength)


def trained_metrics(
    env_cfg: EnvConfig,
    topology: NetTopology,
    calibration: ReadoutCalibration,
    lambda_penalty: float,
    prep: InitialStatePrep,
    seed: int,
    strength: MeasurementStrength = MeasurementStrength.STRONG,
    steps: int = 60,
    eval_preps: tuple[InitialStatePrep, ...] = (),
) -> dict[InitialStatePrep, ValidationMetrics]:
    rng = np.random.default_rng(seed)
    result = train(
        env_cfg, topology, training_budget(steps), RewardConfig(lambda_penalty=lambda_penalty),
        rng, calibration=calibration, prep=prep, strength=strength,
    )
    env = QubitEnvironment(env_cfg, np.random.default_rng(seed + 1), strength, topology.n_actions)
    agent = NetworkPolicy(result.params, np.random.default_rng(seed + 2))
    return {
        p: evaluate_policy(env, agent, calibration, VALIDATION, p) for p in (prep, *eval_preps)
    }


def sigma(*errors: float, n: int = VALIDATION) -> float:
    return float(np.sqrt(sum(max(e, 1e-4) for e in errors) / n))


def frontier_error_at(points, mean_cycles: float) -> float:
    """Threshold-frontier error interpolated at a given cycle count."""
    ordered = sorted(points, key=lambda p: p.metrics.mean_cycles)
    cycles = [p.metrics.mean_cycles for p in ordered]
    errors = [p.metrics.error for p in ordered]
    return float(np.interp(mean_cycles, cycles, errors))


@slow
class StrongReadoutTrainingTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.env_cfg = EnvConfig()
        cls.topology = NetTopology()
        cls.calibration = calibrated(cls.env_cfg, MeasurementStrength.STRONG, 100)
        cls.metrics = trained_metrics(
            cls.env_cfg, cls.topology, cls.calibration, 0.02, InitialStatePrep.EQUILIBRIUM, 101,
            eval_preps=(InitialStatePrep.INVERTED,),
        )
        cls.cheap = trained_metrics(
            cls.env_cfg, cls.topology, cls.calibration, 0.1, InitialStatePrep.EQUILIBRIUM, 102
        )[InitialStatePrep.EQUILIBRIUM]

    def test_error_and_cycles_at_the_operating_point(self):
        equilibrium = self.metrics[InitialStatePrep.EQUILIBRIUM]
        inverted = self.metrics[InitialStatePrep.INVERTED]
        self.assertLessEqual(equilibrium.error, 0.005)
        self.assertGreaterEqual(equilibrium.mean_cycles, 1.0)
        self.assertLessEqual(equilibrium.mean_cycles, 1.4)
        self.assertGreaterEqual(inverted.mean_cycles, 1.8)
        self.assertLessEqual(inverted.mean_cycles, 2.8)

    def test_residual_error_is_close_to_the_oracle_floor(self):
        env = QubitEnvironment(self.env_cfg, np.random.default_rng(103))
        oracle = evaluate_policy(
            env, OraclePolicy(), self.calibration, VALIDATION, InitialStatePrep.EQUILIBRIUM
        )
        agent = self.metrics[InitialStatePrep.EQUILIBRIUM]
        self.assertLessEqual(oracle.error, agent.error + 3 * sigma(oracle.error, agent.error))
        self.assertLessEqual(agent.error - oracle.error, 0.0015 + 3 * sigma(oracle.error, agent.error))

    def test_agent_matches_the_threshold_frontier(self):
        env = QubitEnvironment(self.env_cfg, np.random.default_rng(104))
        points = threshold_frontier(
            env, self.calibration, accept_threshold_grid(self.calibration),
            InitialStatePrep.EQUILIBRIUM, 5000,
        )
        agent = self.metrics[InitialStatePrep.EQUILIBRIUM]
        baseline = frontier_error_at(points, agent.mean_cycles)
        self.assertLessEqual(agent.error, 1.2 * baseline + 3 * sigma(agent.error, baseline, n=5000))

    def test_larger_penalty_spends_fewer_cycles(self):
        agent = self.metrics[InitialStatePrep.EQUILIBRIUM]
        self.assertLessEqual(self.cheap.mean_cycles, agent.mean_cycles + 0.05)
        self.assertGreaterEqual(self.cheap.error, agent.error - 3 * sigma(self.cheap.error, agent.error))


@slow
class WeakReadoutMemoryTest(unittest.TestCase):
    def test_memory_does_not_lose_to_memoryless_strategies(self):
        env_cfg = EnvConfig()
        weak = MeasurementStrength.WEAK
        prep = InitialStatePrep.QUBIT_MIXED
        calibration = calibrated(env_cfg, weak, 200)
        results = {
            depth: trained_metrics(
                env_cfg, NetTopology(memory_depth=depth), calibration, 0.02, prep, 201 + depth,
                strength=weak, steps=100,
            )[prep]
            for depth in (0, 2)
        }
        env = QubitEnvironment(env_cfg, np.random.default_rng(210), weak)
        points = threshold_frontier(env, calibration, accept_threshold_grid(calibration), prep, 5000)

        remembering, memoryless = results[2], results[0]
        baseline = frontier_error_at(points, remembering.mean_cycles)
        self.assertLessEqual(
            remembering.error, baseline + 3 * sigma(remembering.error, baseline, n=5000)
        )
        # at no more cycles, the l=2 agent is at least as accurate as l=0
        if remembering.mean_cycles <= memoryless.mean_cycles:
            self.assertLessEqual(
                remembering.error,
                memoryless.error + 3 * sigma(remembering.error, memoryless.error),
            )
        else:
            self.assertLess(remembering.error, memoryless.error)


@slow
class QutritResetTest(unittest.TestCase):
    def test_gf_flip_shortens_the_reset(self):
        env_cfg = EnvConfig(levels=3)
        prep = InitialStatePrep.QUTRIT_MIXED
        calibration = calibrated(env_cfg, MeasurementStrength.STRONG, 300)
        four, three = (
            trained_metrics(
                env_cfg, NetTopology(n_actions=n), calibration, 0.02, prep, 301 + n, steps=100
            )[prep]
            for n in (4, 3)
        )
        self.assertLessEqual(four.error, 0.005)
        self.assertLessEqual(four.mean_cycles, 2.5)
        self.assertTrue(
            three.mean_cycles >= 1.5 * four.mean_cycles
            or three.error > four.error + 3 * sigma(three.error, four.error),
            msg=f"3 actions: {three.to_dict()}, 4 actions: {four.to_dict()}",
        )


@slow
class DiscriminationCurveTest(unittest.TestCase):
    def test_network_catches_up_with_decay_at_long_windows(self):
        env = QubitEnvironment(EnvConfig(), np.random.default_rng(400))
        cfg = DiscriminationConfig(
            n_traces=8192, taus=[100e-9, 200e-9, 1e-6, 2e-6], epochs=150, restarts=2
        )
        dataset = simulate_labeled_set(env, cfg.n_traces, cfg.trace_duration)
        curve = discrimination_curve(
            dataset, NetTopology(), cfg.taus, cfg, PpoHyperparams(), np.random.default_rng(401)
        )
        n_val = len(dataset) // 2
        for k, tau in enumerate(curve.taus):
            tol = 3 * sigma(curve.nn_infidelity[k], curve.mf_infidelity[k], n=n_val)
            if tau <= 200e-9:
                self.assertLessEqual(abs(curve.nn_infidelity[k] - curve.mf_infidelity[k]), 0.003 + tol)
            else:
                self.assertLessEqual(curve.nn_infidelity[k], curve.mf_infidelity[k] + tol)
        self.assertLess(curve.nn_infidelity[-1], curve.mf_infidelity[-1])
        self.assertGreater(curve.mf_infidelity[-1], min(curve.mf_infidelity))


if __name__ == "__main__":
    unittest.main()
