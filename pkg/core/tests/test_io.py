"""
Test configuration loading, result files and trial seeding.
"""

import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings

from core.exceptions import ConfigError
from core.io import config_digest, json_safe, load_config, summary_path, write_csv, write_summary
from core.trials import run_trials, trial_seed


class LoadConfigTests(SimpleTestCase):
    """Test reading TOML and JSON configurations."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_toml_and_json_agree(self):
        toml = self.root / "a.toml"
        toml.write_text('L = 8\ndelta = 0.5\nensemble = "iid_gaussian"\n', encoding="utf-8")
        data = self.root / "a.json"
        data.write_text(json.dumps({"L": 8, "delta": 0.5, "ensemble": "iid_gaussian"}))

        self.assertEqual(load_config(toml), load_config(data))

    def test_unsupported_format(self):
        path = self.root / "a.yaml"
        path.write_text("L: 8\n")

        with self.assertRaises(ConfigError):
            load_config(path)

    def test_json_must_be_an_object(self):
        path = self.root / "a.json"
        path.write_text("[1, 2]")

        with self.assertRaises(ConfigError):
            load_config(path)

    def test_malformed_toml(self):
        path = self.root / "a.toml"
        path.write_text("L = = 8\n")

        with self.assertRaises(ConfigError):
            load_config(path)


class OutputTests(SimpleTestCase):
    """Test the CSV and JSON writers."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_csv_layout(self):
        path = write_csv(self.root / "sub" / "r.csv", "se", "abc", 7, ["a", "b"], [(1, 0.1), (2, 1e-20)])

        self.assertEqual(
            path.read_text(encoding="utf-8"),
            "# command: se\n# config_sha256: abc\n# seed: 7\na,b\n1,0.1\n2,1e-20\n",
        )

    def test_summary_next_to_csv(self):
        text = write_summary(self.root / "r.csv", {"b": np.float64(0.5), "a": [1, 2]})

        self.assertEqual(summary_path(self.root / "r.csv"), self.root / "r.json")
        self.assertEqual(json.loads((self.root / "r.json").read_text()), {"a": [1, 2], "b": 0.5})
        self.assertTrue(text.endswith("\n"))

    def test_digest_ignores_key_order(self):
        self.assertEqual(config_digest({"a": 1, "b": 2}), config_digest({"b": 2, "a": 1}))
        self.assertNotEqual(config_digest({"a": 1}), config_digest({"a": 2}))

    def test_json_safe(self):
        self.assertEqual(
            json_safe({"a": math.nan, "b": [1.0, math.inf, (2, -math.inf)], "c": "x"}),
            {"a": None, "b": [1.0, None, [2, None]], "c": "x"},
        )


class TrialTests(SimpleTestCase):
    """Test seeded trial batches."""

    @staticmethod
    def draw(index, stream):
        return index, float(np.random.default_rng(stream).random())

    def test_streams_depend_on_seed_and_index(self):
        first = np.random.default_rng(trial_seed(5, 0)).random()
        self.assertEqual(first, np.random.default_rng(trial_seed(5, 0)).random())
        self.assertNotEqual(first, np.random.default_rng(trial_seed(5, 1)).random())
        self.assertNotEqual(first, np.random.default_rng(trial_seed(6, 0)).random())

    def test_results_ordered_and_independent_of_workers(self):
        serial = run_trials(self.draw, 11, 6, workers=1)
        pooled = run_trials(self.draw, 11, 6, workers=3)

        self.assertEqual(serial, pooled)
        self.assertEqual([index for index, _ in serial], list(range(6)))

    @override_settings(AMPLAB={"WORKERS": 2})
    def test_default_workers_from_settings(self):
        self.assertEqual(run_trials(self.draw, 1, 3), run_trials(self.draw, 1, 3, workers=1))
