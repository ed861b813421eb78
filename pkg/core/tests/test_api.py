"""
Test the read-only API over recorded runs.
"""

from django.test import TestCase
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APIClient

from core.models import ExperimentRun

RUNS_URL = reverse("run-list")


def detail_url(run_id):
    return reverse("run-detail", args=[run_id])


def create_run(**params):
    defaults = {
        "command": "se",
        "config_sha256": "0" * 64,
        "seed": 0,
        "config": {"L": 4},
        "summary": {"average_mse": 0.01},
        "output_path": "out/se.csv",
    }
    defaults.update(params)
    return ExperimentRun.objects.create(**defaults)


class ExperimentRunApiTests(TestCase):
    """Test listing and retrieving runs."""

    def setUp(self):
        self.client = APIClient()

    def test_list_runs(self):
        """Test runs are listed with pagination."""
        create_run()
        create_run(command="potential")

        res = self.client.get(RUNS_URL)

        self.assertEqual(res.status_code, status.HTTP_200_OK)
        self.assertEqual(res.data["count"], 2)

    def test_filter_by_command(self):
        """Test the command query parameter filters runs."""
        create_run()
        create_run(command="potential")

        res = self.client.get(RUNS_URL, {"command": "potential"})

        self.assertEqual(res.data["count"], 1)
        self.assertEqual(res.data["results"][0]["command"], "potential")

    def test_retrieve_run(self):
        """Test a run is returned with its configuration and summary."""
        run = create_run()

        res = self.client.get(detail_url(run.id))

        self.assertEqual(res.status_code, status.HTTP_200_OK)
        self.assertEqual(res.data["config"], {"L": 4})
        self.assertEqual(res.data["summary"], {"average_mse": 0.01})

    def test_retrieve_missing_run(self):
        """Test an unknown id returns 404."""
        res = self.client.get(detail_url(999))

        self.assertEqual(res.status_code, status.HTTP_404_NOT_FOUND)

    def test_runs_are_read_only(self):
        """Test runs cannot be created through the API."""
        res = self.client.post(RUNS_URL, {"command": "se"}, format="json")

        self.assertEqual(res.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)

    def test_filter_by_seed_and_hash(self):
        """Test runs can be looked up by seed and configuration hash."""
        create_run(seed=1)
        create_run(seed=2, config_sha256="f" * 64)

        res = self.client.get(RUNS_URL, {"seed": 2, "config_sha256": "f" * 64})

        self.assertEqual(res.data["count"], 1)
        self.assertEqual(res.data["results"][0]["seed"], 2)
