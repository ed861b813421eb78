"""
Django command to tabulate the potential function and its minimizers.
"""

from core.experiments import potential
from core.management.base import ExperimentCommand
from core.serializers import PotentialConfigSerializer


class Command(ExperimentCommand):
    """Django command to evaluate the potential function."""

    help = "Potential function on [0, 1] with its local minimizers."
    serializer_class = PotentialConfigSerializer
    name = "potential"

    def run(self, config, options):
        return potential(config)
