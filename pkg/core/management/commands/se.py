"""
Django command to iterate a state-evolution recursion.
"""

from core.experiments import state_evolution
from core.management.base import ExperimentCommand
from core.serializers import SeConfigSerializer
from evolution.recursions import KINDS


class Command(ExperimentCommand):
    """Django command to run state evolution on a coupled model."""

    help = "Per-section posterior variance trajectory of a state-evolution recursion."
    serializer_class = SeConfigSerializer
    name = "se"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--kind", choices=KINDS, help="Recursion to iterate")

    def prepare(self, raw, options):
        if options.get("kind"):
            raw = {**raw, "kind": options["kind"]}
        return super().prepare(raw, options)

    def run(self, config, options):
        return state_evolution(config)
