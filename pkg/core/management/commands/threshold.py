"""
Django command to compute BP, potential and spatial-coupling thresholds.
"""

from core.experiments import thresholds
from core.management.base import ExperimentCommand
from core.serializers import ThresholdConfigSerializer


class Command(ExperimentCommand):
    """Django command to compute compression-rate thresholds."""

    help = "Thresholds per condition number and coupling width."
    serializer_class = ThresholdConfigSerializer
    name = "threshold"

    def run(self, config, options):
        return thresholds(config)
