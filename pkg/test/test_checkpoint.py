import dataclasses
import json
import tempfile
import threading
import unittest
from pathlib import Path

import numpy as np

from agent.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from agent.network import PolicyParams
from agent.param_store import ParamStore
from agent.quantize import FixedPointScheme, quantize
from test.helpers import small_topology


class TestCheckpoint(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "checkpoints" / "step_0003.json"
        self.topology = small_topology()
        self.params = PolicyParams.init(self.topology, np.random.default_rng(0))

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        save_checkpoint(self.path, self.params, step=3, extra={"error": 0.02})
        params, header = load_checkpoint(self.path, expected_topology=self.topology)
        np.testing.assert_array_equal(params.theta(), self.params.theta())
        self.assertEqual(header["step"], 3)
        self.assertEqual(header["extra"], {"error": 0.02})
        self.assertEqual(header["topology"], self.topology.to_dict())

    def test_fixed_point_scheme_is_kept(self):
        save_checkpoint(self.path, quantize(self.params, FixedPointScheme()))
        params, _ = load_checkpoint(self.path)
        self.assertEqual(params.fixed_point, FixedPointScheme())

    def test_no_temporary_file_left(self):
        save_checkpoint(self.path, self.params)
        self.assertEqual([p.name for p in self.path.parent.iterdir()], [self.path.name])

    def test_topology_mismatch(self):
        save_checkpoint(self.path, self.params)
        other = dataclasses.replace(self.topology, hidden_width=self.topology.hidden_width + 1)
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path, expected_topology=other)

    def test_foreign_or_stale_files(self):
        save_checkpoint(self.path, self.params)
        payload = json.loads(self.path.read_text())
        for key, value in (("format", "something-else"), ("version", 99)):
            with self.subTest(key=key):
                self.path.write_text(json.dumps({**payload, key: value}))
                with self.assertRaises(CheckpointError):
                    load_checkpoint(self.path)

    def test_unreadable_file(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint(Path(self.tmp.name) / "missing.json")
        self.path.parent.mkdir(parents=True)
        self.path.write_text("{not json")
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path)


class TestParamStore(unittest.TestCase):
    def setUp(self):
        topology = small_topology()
        self.a = PolicyParams.zeros(topology)
        self.b = PolicyParams.init(topology, np.random.default_rng(1))

    def test_empty_store(self):
        store = ParamStore()
        self.assertEqual(store.version, 0)
        with self.assertRaises(RuntimeError):
            store.get()
        with self.assertRaises(RuntimeError):
            store.snapshot()

    def test_publish_bumps_version(self):
        store = ParamStore(self.a)
        self.assertEqual(store.version, 1)
        self.assertEqual(store.publish(self.b), 2)
        version, params = store.snapshot()
        self.assertEqual(version, 2)
        self.assertIs(params, self.b)

    def test_compare_and_publish(self):
        store = ParamStore(self.a)
        self.assertFalse(store.compare_and_publish(0, self.b))
        self.assertIs(store.get(), self.a)
        self.assertTrue(store.compare_and_publish(1, self.b))
        self.assertIs(store.get(), self.b)

    def test_readers_only_see_published_snapshots(self):
        store = ParamStore(self.a)
        seen = []

        def read():
            for _ in range(200):
                seen.append(store.get())

        reader = threading.Thread(target=read)
        reader.start()
        for _ in range(50):
            store.publish(self.b)
            store.publish(self.a)
        reader.join()
        self.assertTrue(all(p is self.a or p is self.b for p in seen))
        self.assertEqual(store.version, 101)


if __name__ == "__main__":
    unittest.main()
