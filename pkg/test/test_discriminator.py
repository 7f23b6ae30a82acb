import tempfile
import unittest
from pathlib import Path

import numpy as np

from agent.discriminator import (
    DiscriminationCurve,
    MatchedFilterClassifier,
    classifier_topology,
    discrimination_curve,
    error_decomposition,
    load_labeled_set,
    save_labeled_set,
    simulate_labeled_set,
    train_classifier,
)
from core.envsim import QubitEnvironment
from core.models.config import DiscriminationConfig, EnvConfig, PpoHyperparams
from core.readout import readout_infidelity
from test.helpers import quiet_env, small_topology

DURATION = 64e-9


def small_discrimination(**overrides) -> DiscriminationConfig:
    base = dict(
        n_traces=64, trace_duration=DURATION, taus=[DURATION], epochs=30, restarts=1, batch_size=32
    )
    base.update(overrides)
    return DiscriminationConfig(**base)


class LabeledSetTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        env = QubitEnvironment(EnvConfig(readout_len=64), np.random.default_rng(0))
        cls.dataset = simulate_labeled_set(env, 40, DURATION)

    def test_splits_are_disjoint_and_balanced(self):
        train, validation = self.dataset.train(), self.dataset.validation()
        self.assertEqual(len(train) + len(validation), len(self.dataset))
        self.assertTrue(all(t is self.dataset.traces[2 * k] for k, t in enumerate(train.traces)))
        self.assertTrue(all(t is self.dataset.traces[2 * k + 1] for k, t in enumerate(validation.traces)))
        self.assertAlmostEqual(train.excited_fraction, 0.5)
        self.assertAlmostEqual(validation.excited_fraction, 0.5)

    def test_split_of_a_split(self):
        with self.assertRaises(ValueError):
            self.dataset.train().validation()

    def test_duration(self):
        self.assertEqual(self.dataset.n_samples, 64)
        self.assertAlmostEqual(self.dataset.duration, DURATION)

    def test_csv_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_labeled_set(Path(tmp) / "traces.csv", self.dataset)
            loaded = load_labeled_set(path)
        np.testing.assert_array_equal(loaded.labels, self.dataset.labels)
        np.testing.assert_allclose(loaded.traces[3].i_samples, self.dataset.traces[3].i_samples)
        self.assertAlmostEqual(loaded.sample_rate / self.dataset.sample_rate, 1.0, places=6)

    def test_classifier_topology(self):
        topo = classifier_topology(small_topology(memory_depth=1), 32)
        self.assertEqual((topo.n_actions, topo.memory_depth, topo.boxcar_width), (2, 0, 4))


class ClassifierTest(unittest.TestCase):
    def test_separable_traces_are_learned(self):
        env = QubitEnvironment(quiet_env(snr=1e9, readout_len=64), np.random.default_rng(1))
        dataset = simulate_labeled_set(env, 64, DURATION)
        cfg = small_discrimination(epochs=150)
        model = train_classifier(
            dataset, small_topology(), DURATION, cfg, PpoHyperparams(adam_lr=1e-2), np.random.default_rng(2)
        )
        assigned = model.classify(dataset.traces, dataset.sample_rate)
        self.assertEqual(readout_infidelity(assigned, dataset.labels, 2), 0.0)
        self.assertLess(model.train_loss, model.loss_history[0])
        self.assertEqual(model.epochs, len(model.loss_history))

        mf = MatchedFilterClassifier.fit(dataset, 64)
        self.assertEqual(readout_infidelity(mf.classify(dataset.traces, dataset.sample_rate), dataset.labels, 2), 0.0)

    def test_capped_training_is_flagged_unconverged(self):
        env = QubitEnvironment(EnvConfig(readout_len=64), np.random.default_rng(3))
        dataset = simulate_labeled_set(env, 64, DURATION)
        model = train_classifier(
            dataset, small_topology(), DURATION, small_discrimination(epochs=5, restarts=3),
            PpoHyperparams(), np.random.default_rng(4),
        )
        self.assertFalse(model.converged)
        self.assertEqual(model.epochs, 5)

    def test_tau_outside_the_traces(self):
        env = QubitEnvironment(EnvConfig(readout_len=64), np.random.default_rng(5))
        dataset = simulate_labeled_set(env, 8, DURATION)
        with self.assertRaises(ValueError):
            train_classifier(
                dataset, small_topology(), 2 * DURATION, small_discrimination(), PpoHyperparams(),
                np.random.default_rng(6),
            )


class DecompositionTest(unittest.TestCase):
    def _check_sum(self, dataset):
        mf = MatchedFilterClassifier.fit(dataset, dataset.n_samples)
        assigned = mf.classify(dataset.traces, dataset.sample_rate)
        parts = error_decomposition(dataset, assigned, dataset.duration)
        self.assertAlmostEqual(sum(parts.values()), readout_infidelity(assigned, dataset.labels, 2), places=12)
        return parts

    def test_heralded_parts_add_up(self):
        env = QubitEnvironment(EnvConfig(readout_len=64, t1_e=200e-9), np.random.default_rng(7))
        parts = self._check_sum(simulate_labeled_set(env, 400, DURATION))
        self.assertEqual(parts["preparation"], 0.0)
        self.assertGreater(parts["decay"], 0.0)

    def test_unheralded_preparation_errors(self):
        env = QubitEnvironment(EnvConfig(readout_len=64, p_therm=0.2), np.random.default_rng(8))
        parts = self._check_sum(simulate_labeled_set(env, 400, DURATION, heralded=False))
        self.assertGreater(parts["preparation"], 0.0)


class CurveTest(unittest.TestCase):
    def test_curve_over_two_times(self):
        env = QubitEnvironment(EnvConfig(readout_len=64), np.random.default_rng(9))
        dataset = simulate_labeled_set(env, 96, DURATION)
        taus = [DURATION / 2, DURATION]
        curve = discrimination_curve(
            dataset, small_topology(), taus, small_discrimination(epochs=10, taus=taus),
            PpoHyperparams(adam_lr=1e-2), np.random.default_rng(10),
        )
        self.assertEqual(curve.taus, taus)
        for name in ("nn_infidelity", "mf_infidelity", "overlap_error", "nn_converged"):
            self.assertEqual(len(getattr(curve, name)), 2)
        for k in range(2):
            total = curve.overlap_error[k] + curve.decay_error[k] + curve.preparation_error[k]
            self.assertAlmostEqual(total, curve.mf_infidelity[k], places=12)
        with tempfile.TemporaryDirectory() as tmp:
            restored = DiscriminationCurve.load_csv(curve.save_csv(Path(tmp) / "curve.csv"))
        self.assertEqual(restored.rows(), curve.rows())

    def test_best_of_several_topologies_is_kept(self):
        env = QubitEnvironment(EnvConfig(readout_len=64), np.random.default_rng(13))
        dataset = simulate_labeled_set(env, 64, DURATION)
        cfg = small_discrimination(epochs=5)
        candidates = [small_topology(), small_topology(hidden_width=3, n_hidden_layers=1)]
        curve = discrimination_curve(
            dataset, candidates, [DURATION], cfg, PpoHyperparams(), np.random.default_rng(14)
        )
        self.assertIn(curve.nn_topology[0], (0, 1))

        single = discrimination_curve(
            dataset, small_topology(), [DURATION], cfg, PpoHyperparams(), np.random.default_rng(15)
        )
        listed = discrimination_curve(
            dataset, [small_topology()], [DURATION], cfg, PpoHyperparams(), np.random.default_rng(15)
        )
        self.assertEqual(single.rows(), listed.rows())
        self.assertEqual(single.nn_topology, [0])
        with self.assertRaises(ValueError):
            discrimination_curve(dataset, [], [DURATION], cfg, PpoHyperparams(), np.random.default_rng(16))

    def test_times_must_ascend(self):
        env = QubitEnvironment(EnvConfig(readout_len=64), np.random.default_rng(11))
        dataset = simulate_labeled_set(env, 16, DURATION)
        with self.assertRaises(ValueError):
            discrimination_curve(
                dataset, small_topology(), [DURATION, DURATION / 2], small_discrimination(),
                PpoHyperparams(), np.random.default_rng(12),
            )


if __name__ == "__main__":
    unittest.main()
