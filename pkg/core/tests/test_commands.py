"""
Test the experiment management commands.
"""

import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from core.models import ExperimentRun

SE_CONFIG = {
    "L": 4,
    "W": 1,
    "delta": 0.5,
    "ensemble": "iid_gaussian",
    "rho": 0.1,
    "snr_db": 30,
    "T": 20,
}

SIMULATE_CONFIG = {
    "L": 2,
    "W": 1,
    "N": 64,
    "M": 32,
    "ensemble": "row_orthogonal",
    "rho": 0.1,
    "snr_db": 30,
    "T": 5,
    "trials": 2,
    "seed": 3,
}


class CommandTests(TestCase):
    """Test commands."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def write_config(self, data, name="config.json"):
        path = self.root / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    def run_command(self, command, config, out="out.csv", *args):
        stdout = StringIO()
        target = self.root / out
        call_command(
            command, "--config", str(config), "--out", str(target), *args, stdout=stdout
        )
        return target, stdout.getvalue()

    def read_rows(self, path):
        lines = path.read_text(encoding="utf-8").splitlines()
        meta = [line for line in lines if line.startswith("#")]
        body = [line for line in lines if not line.startswith("#")]
        return meta, body[0].split(","), body[1:]

    def test_state_evolution(self):
        """Test the se command writes a trajectory and a summary."""
        target, output = self.run_command("se", self.write_config(SE_CONFIG))
        meta, header, rows = self.read_rows(target)

        self.assertEqual(meta[0], "# command: se")
        self.assertEqual(meta[2], "# seed: 0")
        self.assertEqual(header, ["iter", "section", "v_post"])
        self.assertEqual(len(rows) % 4, 0)
        summary = json.loads(target.with_suffix(".json").read_text(encoding="utf-8"))
        self.assertEqual(summary["kind"], "bayes")
        self.assertIn("se: wrote", output)

        run = ExperimentRun.objects.get()
        self.assertEqual(run.command, "se")
        self.assertEqual(run.summary["kind"], "bayes")
        self.assertEqual(run.config["L"], 4)

    def test_approximate_state_evolution_reports_difference(self):
        """Test the approximate recursion is compared with the exact one."""
        config = self.write_config({**SE_CONFIG, "kind": "approx"})
        target, _ = self.run_command("se", config)
        _, header, _ = self.read_rows(target)

        self.assertEqual(header, ["iter", "section", "v_post", "bayes_v_post", "diff"])

    def test_toml_configuration(self):
        """Test configurations may be written in TOML."""
        config = self.root / "config.toml"
        config.write_text(
            'ensemble = "geometric"\ndelta = 0.5\nkappa = 10.0\npoints = 5\nz_max = 4.0\n',
            encoding="utf-8",
        )
        target, _ = self.run_command("spectrum", config)
        _, header, rows = self.read_rows(target)

        self.assertEqual(header, ["z", "eta", "R"])
        self.assertEqual(len(rows), 5)
        self.assertEqual(rows[0].split(",")[:2], ["0.0", "1.0"])

    def test_missing_key_exit_status(self):
        """Test a missing required key exits with status 2."""
        config = {key: value for key, value in SE_CONFIG.items() if key != "snr_db"}

        with self.assertRaises(CommandError) as ctx:
            self.run_command("se", self.write_config(config))

        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn("snr_db", str(ctx.exception))
        self.assertFalse(ExperimentRun.objects.exists())

    def test_missing_sparsity_exit_status(self):
        """Test a Bernoulli-Gaussian prior without rho exits with status 2."""
        config = {key: value for key, value in SE_CONFIG.items() if key != "rho"}

        with self.assertRaises(CommandError) as ctx:
            self.run_command("se", self.write_config(config))

        self.assertEqual(ctx.exception.returncode, 2)

    def test_unknown_key_rejected(self):
        """Test a misspelled key is an error instead of a silent default."""
        with self.assertRaises(CommandError) as ctx:
            self.run_command("se", self.write_config({**SE_CONFIG, "colour": "red"}))

        self.assertEqual(ctx.exception.returncode, 1)

    def test_invalid_coupling_rejected(self):
        """Test W must be smaller than L."""
        with self.assertRaises(CommandError):
            self.run_command("se", self.write_config({**SE_CONFIG, "W": 4}))

    def test_simulation_is_reproducible(self):
        """Test the same seed writes byte-identical output."""
        config = self.write_config(SIMULATE_CONFIG)
        first, _ = self.run_command("simulate", config, "first.csv")
        second, _ = self.run_command("simulate", config, "second.csv")
        other, _ = self.run_command("simulate", config, "other.csv", "--seed", "4")

        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertNotEqual(first.read_bytes(), other.read_bytes())
        self.assertEqual(ExperimentRun.objects.count(), 3)
        self.assertEqual(ExperimentRun.objects.filter(seed=4).count(), 1)

    def test_simulation_rows(self):
        """Test one row per trial, iteration and section."""
        target, _ = self.run_command("simulate", self.write_config(SIMULATE_CONFIG))
        _, header, rows = self.read_rows(target)

        self.assertEqual(header, ["point", "trial", "iter", "section", "mse"])
        self.assertEqual(len(rows), 2 * 5 * 2)
        summary = json.loads(target.with_suffix(".json").read_text(encoding="utf-8"))
        self.assertEqual(summary["points"][0]["failed_trials"], 0)

    def test_simulation_sweep(self):
        """Test every sweep point is validated and run."""
        config = self.write_config(
            {**SIMULATE_CONFIG, "trials": 1, "sweep": [{"zeta": 0.8}, {"delta": 0.25}]}
        )
        target, _ = self.run_command("simulate", config)
        summary = json.loads(target.with_suffix(".json").read_text(encoding="utf-8"))

        self.assertEqual([p["zeta"] for p in summary["points"]], [0.8, 1.0])
        self.assertEqual([p["M"] for p in summary["points"]], [32, 16])

    def test_worker_count_does_not_change_results(self):
        """Test trials are independent of the thread pool size."""
        config = self.write_config(SIMULATE_CONFIG)
        serial, _ = self.run_command("simulate", config, "serial.csv", "--workers", "1")
        pooled, _ = self.run_command("simulate", config, "pooled.csv", "--workers", "2")

        self.assertEqual(serial.read_bytes(), pooled.read_bytes())

    def test_potential(self):
        """Test the potential command tabulates F on the requested grid."""
        config = self.write_config(
            {"delta": 0.3, "ensemble": "iid_gaussian", "rho": 0.1, "snr_db": 30, "grid_n": 64}
        )
        target, _ = self.run_command("potential", config)
        _, header, rows = self.read_rows(target)

        self.assertEqual(header, ["E", "F"])
        self.assertEqual(len(rows), 64)
        self.assertIn("E_opt", ExperimentRun.objects.get().summary)

    def test_threshold(self):
        """Test the threshold command reports one row per condition number and width."""
        config = self.write_config(
            {
                "L": 4,
                "ensemble": "iid_gaussian",
                "rho": 0.1,
                "snr_db": 30,
                "kappas": [1.0],
                "Ws": [1],
                "T": 200,
                "tol": 0.05,
                "bracket": [0.12, 0.6],
                "grid_n": 64,
            }
        )
        target, _ = self.run_command("threshold", config)
        _, header, rows = self.read_rows(target)

        self.assertEqual(header, ["kappa", "W", "delta_SC", "rate_adjusted"])
        self.assertEqual(len(rows), 1)
        entry = ExperimentRun.objects.get().summary["thresholds"][0]
        self.assertLessEqual(entry["delta_opt"], entry["delta_BP"])

    def test_long_memory_simulation_reports_equivalence(self):
        """Test LM-OAMP trials carry their equivalence report against OAMP."""
        config = self.write_config(SIMULATE_CONFIG)
        target, _ = self.run_command("simulate", config, "out.csv", "--algo", "lm-oamp")
        point = json.loads(target.with_suffix(".json").read_text(encoding="utf-8"))["points"][0]

        self.assertEqual(point["algo"], "lm-oamp")
        self.assertEqual(len(point["trial_equivalence"]), 2)
        for report in point["trial_equivalence"] + [point["equivalence"]]:
            self.assertEqual(set(report), {"max_mean_dev", "max_var_dev", "posdef_ok"})
        self.assertEqual(
            point["equivalence"]["posdef_ok"],
            all(r["posdef_ok"] for r in point["trial_equivalence"]),
        )
        self.assertEqual(
            point["equivalence"]["max_mean_dev"],
            max(r["max_mean_dev"] for r in point["trial_equivalence"]),
        )

    def test_long_memory_alias(self):
        """Test the unhyphenated algorithm name selects LM-OAMP."""
        config = self.write_config({**SIMULATE_CONFIG, "algo": "lmoamp", "trials": 1})
        target, _ = self.run_command("simulate", config)
        point = json.loads(target.with_suffix(".json").read_text(encoding="utf-8"))["points"][0]

        self.assertEqual(point["algo"], "lm-oamp")
        self.assertIn("equivalence", point)

    def test_long_memory_history_cap(self):
        """Test LM-OAMP rejects more iterations than the history keeps."""
        config = self.write_config({**SIMULATE_CONFIG, "algo": "lm-oamp", "T": 100})

        with self.assertRaises(CommandError) as ctx:
            self.run_command("simulate", config)

        self.assertEqual(ctx.exception.returncode, 1)

    def test_amp_simulation(self):
        """Test the AMP baseline runs through the simulate command."""
        config = self.write_config({**SIMULATE_CONFIG, "ensemble": "iid_gaussian", "algo": "amp"})
        target, _ = self.run_command("simulate", config)
        _, _, rows = self.read_rows(target)
        point = json.loads(target.with_suffix(".json").read_text(encoding="utf-8"))["points"][0]

        self.assertEqual(len(rows), 2 * 5 * 2)
        self.assertEqual(point["algo"], "amp")
        self.assertEqual(point["failed_trials"], 0)
        self.assertNotIn("equivalence", point)

    def test_amp_needs_gaussian_sections(self):
        """Test AMP on row-orthogonal sections is a command error."""
        config = self.write_config({**SIMULATE_CONFIG, "algo": "amp"})

        with self.assertRaises(CommandError):
            self.run_command("simulate", config)
        self.assertFalse(ExperimentRun.objects.exists())

    def test_hadamard_needs_power_of_two_sections(self):
        """Test a Hadamard basis on a three-column-block section is rejected up front."""
        config = self.write_config({**SIMULATE_CONFIG, "L": 3, "W": 2})

        with self.assertRaises(CommandError) as ctx:
            self.run_command("simulate", config)

        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("hadamard", str(ctx.exception))
        self.assertIn("192", str(ctx.exception))

    def test_other_bases_accept_any_section_width(self):
        """Test the DCT basis runs where the Hadamard basis is rejected."""
        config = self.write_config({**SIMULATE_CONFIG, "L": 3, "W": 2, "basis": "dct", "trials": 1})
        target, _ = self.run_command("simulate", config)
        point = json.loads(target.with_suffix(".json").read_text(encoding="utf-8"))["points"][0]

        self.assertEqual(point["failed_trials"], 0)
