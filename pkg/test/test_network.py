import unittest

import numpy as np
import torch
from scipy.stats import chisquare

from agent.latency import ceil_log4, dense_layer_latency, latency_report
from agent.network import (
    LowLatencyPolicy,
    ObservationWindow,
    PolicyParams,
    ShapeMismatchError,
    boxcar,
    build_window,
    forward_flat,
    forward_stream,
)
from agent.quantize import FixedPointScheme, quantize
from agent.sampling import greedy_action, gumbel_argmax
from core.models.config import LatencyConfig, NetTopology
from core.models.quantum import Action
from test.helpers import random_trace, small_topology


class BoxcarTest(unittest.TestCase):
    def test_block_means(self):
        np.testing.assert_allclose(boxcar(np.arange(8.0), 4), [1.5, 5.5])

    def test_partial_block_is_dropped(self):
        self.assertEqual(len(boxcar(np.arange(10.0), 4)), 2)

    def test_width_must_be_positive(self):
        with self.assertRaises(ValueError):
            boxcar(np.arange(4.0), 0)


class TopologyTest(unittest.TestCase):
    def test_default_stream_layout(self):
        topo = NetTopology()
        self.assertEqual(topo.n_stream_layers, 8)
        self.assertEqual(topo.samples_per_block, 4)
        # 256 samples / boxcar 8 = 32 per quadrature = 8 layers x 4
        self.assertEqual(topo.n_stream_layers * topo.samples_per_block * topo.boxcar_width, topo.readout_len)
        self.assertEqual(topo.memory_features, 0)

    def test_memory_features(self):
        topo = NetTopology(memory_depth=2)
        self.assertEqual(topo.memory_features_per_cycle, 2 * 8 + 3)
        self.assertEqual(topo.memory_features, 38)


class ForwardTest(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def _history(self, topo, n):
        return tuple((random_trace(topo.readout_len, self.rng), Action.IDLE) for _ in range(n))

    def test_streaming_equals_flat_evaluation(self):
        for depth in (0, 1, 2):
            topo = small_topology(memory_depth=depth)
            params = PolicyParams.init(topo, self.rng)
            window = build_window(random_trace(topo.readout_len, self.rng), self._history(topo, 3), topo)
            np.testing.assert_allclose(
                forward_stream(params, window), forward_flat(params, window.flat()), atol=1e-12
            )

    def test_probabilities_are_a_distribution(self):
        topo = small_topology()
        params = PolicyParams.init(topo, self.rng)
        probs = forward_stream(params, build_window(random_trace(topo.readout_len, self.rng), (), topo))
        self.assertEqual(probs.shape, (3,))
        self.assertAlmostEqual(probs.sum(), 1.0, places=12)
        self.assertTrue(np.all(probs > 0))

    def test_zero_parameters_give_uniform_policy(self):
        topo = small_topology(n_actions=4)
        probs = forward_stream(
            PolicyParams.zeros(topo), build_window(random_trace(topo.readout_len, self.rng), (), topo)
        )
        np.testing.assert_allclose(probs, 0.25)

    def test_memoryless_policy_ignores_past_cycles(self):
        topo = small_topology(memory_depth=0)
        params = PolicyParams.init(topo, self.rng)
        self.assertTrue(all(w.size == 0 and not np.any(b) for w, b in params.preproc))
        trace = random_trace(topo.readout_len, self.rng)
        baseline = forward_stream(params, build_window(trace, (), topo))
        for n in (1, 3):
            window = build_window(trace, self._history(topo, n), topo)
            self.assertEqual(window.memory.shape, (0,))
            np.testing.assert_array_equal(forward_stream(params, window), baseline)

        remembering = small_topology(memory_depth=2)
        params = PolicyParams.init(remembering, self.rng)
        fresh = forward_stream(params, build_window(trace, (), remembering))
        seen = forward_stream(params, build_window(trace, self._history(remembering, 2), remembering))
        self.assertFalse(np.allclose(fresh, seen))

    def test_torch_twin_matches_numpy(self):
        topo = small_topology(memory_depth=1)
        params = PolicyParams.init(topo, self.rng)
        windows = [
            build_window(random_trace(topo.readout_len, self.rng), self._history(topo, 1), topo)
            for _ in range(5)
        ]
        obs = torch.as_tensor(np.stack([w.flat() for w in windows]), dtype=torch.float64)
        with torch.no_grad():
            torch_probs = LowLatencyPolicy.from_params(params).probabilities(obs).numpy()
        numpy_probs = np.stack([forward_stream(params, w) for w in windows])
        np.testing.assert_allclose(torch_probs, numpy_probs, atol=1e-12)

    def test_export_round_trip(self):
        topo = small_topology()
        params = PolicyParams.init(topo, self.rng)
        exported = LowLatencyPolicy.from_params(params).export_params()
        np.testing.assert_array_equal(exported.theta(), params.theta())
        restored = PolicyParams.from_dict(params.to_dict())
        np.testing.assert_array_equal(restored.theta(), params.theta())

    def test_missing_history_is_zero_filled(self):
        topo = small_topology(memory_depth=2)
        window = build_window(random_trace(topo.readout_len, self.rng), self._history(topo, 1), topo)
        np.testing.assert_array_equal(window.memory[topo.memory_features_per_cycle :], 0.0)
        self.assertEqual(window.memory[2 * topo.memory_samples_per_quadrature + int(Action.IDLE)], 1.0)

    def test_wrong_shapes_are_rejected(self):
        topo = small_topology()
        params = PolicyParams.init(topo, self.rng)
        with self.assertRaises(ShapeMismatchError):
            forward_stream(params, ObservationWindow(np.zeros((2, 4)), np.zeros(0)))
        with self.assertRaises(ShapeMismatchError):
            forward_flat(params, np.zeros(topo.observation_size + 1))
        with self.assertRaises(ShapeMismatchError):
            PolicyParams.from_theta(topo, np.zeros(params.n_parameters - 1))

    def test_same_rng_same_init(self):
        topo = small_topology()
        a = PolicyParams.init(topo, np.random.default_rng(7))
        b = PolicyParams.init(topo, np.random.default_rng(7))
        np.testing.assert_array_equal(a.theta(), b.theta())


class QuantizeTest(unittest.TestCase):
    def test_default_word_is_18_bits(self):
        scheme = FixedPointScheme()
        self.assertEqual(scheme.total_bits, 18)
        self.assertAlmostEqual(scheme.max_value, 32 - 2**-12)

    def test_rounding_and_saturation(self):
        values, saturated = FixedPointScheme(int_bits=1, frac_bits=2).apply(np.array([0.3, 5.0, -5.0]))
        np.testing.assert_allclose(values, [0.25, 1.75, -1.75])
        self.assertTrue(saturated)

    def test_exact_scheme_is_identity(self):
        rng = np.random.default_rng(1)
        topo = small_topology()
        params = PolicyParams.init(topo, rng)
        exact = quantize(params, FixedPointScheme(frac_bits=None))
        self.assertIsNone(exact.fixed_point)
        np.testing.assert_array_equal(exact.theta(), params.theta())

    def test_default_grid_keeps_argmax(self):
        rng = np.random.default_rng(3)
        topo = NetTopology()
        params = PolicyParams.init(topo, rng)
        quantized = quantize(params, FixedPointScheme())
        agree = [
            np.argmax(forward_stream(quantized, window)) == np.argmax(forward_stream(params, window))
            for window in (
                build_window(random_trace(topo.readout_len, rng), (), topo) for _ in range(2000)
            )
        ]
        self.assertGreaterEqual(np.mean(agree), 0.99)

    def test_integer_grid_zeroes_sub_unit_weights(self):
        rng = np.random.default_rng(4)
        topo = small_topology()
        quantized = quantize(PolicyParams.init(topo, rng), FixedPointScheme(frac_bits=0))
        np.testing.assert_array_equal(quantized.theta(), 0.0)
        probs = forward_stream(quantized, build_window(random_trace(topo.readout_len, rng), (), topo))
        np.testing.assert_allclose(probs, 1.0 / topo.n_actions)

    def test_fine_grid_barely_moves_outputs(self):
        rng = np.random.default_rng(2)
        topo = small_topology()
        params = PolicyParams.init(topo, rng)
        window = build_window(random_trace(topo.readout_len, rng), (), topo)
        quantized = quantize(params, FixedPointScheme())
        self.assertFalse(quantized.saturated)
        np.testing.assert_allclose(
            forward_stream(quantized, window), forward_stream(params, window), atol=5e-3
        )


class SamplingTest(unittest.TestCase):
    def test_gumbel_frequencies_match_probabilities(self):
        rng = np.random.default_rng(3)
        probs = np.array([0.2, 0.5, 0.3])
        draws = np.array([gumbel_argmax(probs, rng) for _ in range(30_000)])
        freqs = np.bincount(draws, minlength=3) / len(draws)
        np.testing.assert_allclose(freqs, probs, atol=0.015)

    def test_gumbel_draws_pass_chi_square(self):
        rng = np.random.default_rng(3)
        probs = np.array([0.2, 0.3, 0.5])
        n = 200_000
        counts = np.bincount([gumbel_argmax(probs, rng) for _ in range(n)], minlength=3)
        self.assertGreater(chisquare(counts, n * probs).pvalue, 1e-3)

    def test_zero_probability_is_never_drawn(self):
        rng = np.random.default_rng(4)
        draws = {gumbel_argmax(np.array([0.0, 1.0, 0.0]), rng) for _ in range(200)}
        self.assertEqual(draws, {1})

    def test_invalid_vectors(self):
        rng = np.random.default_rng(5)
        for bad in (np.zeros(3), np.array([-0.1, 1.1]), np.array([])):
            with self.assertRaises(ValueError):
                gumbel_argmax(bad, rng)

    def test_greedy(self):
        self.assertEqual(greedy_action(np.array([0.1, 0.2, 0.7])), Action.FLIP)


class LatencyTest(unittest.TestCase):
    def test_adder_tree_depth(self):
        self.assertEqual([ceil_log4(n) for n in (1, 4, 5, 16, 17, 21, 64, 65)], [0, 1, 2, 2, 3, 3, 3, 4])
        with self.assertRaises(ValueError):
            ceil_log4(0)

    def test_default_ledger(self):
        ledger = latency_report(NetTopology(), LatencyConfig(), 1e9, 856e-9)
        self.assertEqual(ledger.layer_input_size, 20)
        self.assertAlmostEqual(ledger.per_layer_ns, 32.0)
        self.assertAlmostEqual(ledger.boxcar_ns, 16.0)
        self.assertAlmostEqual(ledger.total_nn_ns, 48.0)
        self.assertAlmostEqual(ledger.total_loop_ns, 451.0)
        self.assertEqual(ledger.overlaps_acquisition, [True] * 7 + [False])
        self.assertTrue(ledger.cycle_ok)

    def test_breakpoints_for_every_layer_width(self):
        previous = 0.0
        for n in range(1, 257):
            depth = next(k for k in range(10) if 4**k >= n + 1)
            latency = dense_layer_latency(n, 8.0)
            self.assertEqual(latency, 8.0 * (1 + depth), msg=f"N={n}")
            self.assertGreaterEqual(latency, previous)
            if latency > previous and n > 1:
                self.assertEqual(n, 4 ** (depth - 1), msg=f"step at N={n}")
            previous = latency

    def test_layer_latency(self):
        self.assertAlmostEqual(dense_layer_latency(20, 8.0), 32.0)
        self.assertAlmostEqual(dense_layer_latency(3, 8.0), 16.0)


if __name__ == "__main__":
    unittest.main()
