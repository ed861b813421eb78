"""
Django command to print eta/R tables of a sensing ensemble.
"""

from core.experiments import spectrum_table
from core.management.base import ExperimentCommand
from core.serializers import SpectrumConfigSerializer


class Command(ExperimentCommand):
    """Django command to tabulate spectral transforms."""

    help = "eta- and R-transform table with the moment identities."
    serializer_class = SpectrumConfigSerializer
    name = "spectrum"

    def run(self, config, options):
        return spectrum_table(config)
