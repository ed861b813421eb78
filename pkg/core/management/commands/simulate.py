"""
Django command to run seeded Monte-Carlo trials of OAMP, LM-OAMP or AMP.
"""

from core.experiments import simulate
from core.management.base import ExperimentCommand, validate
from core.serializers import ALGORITHM_ALIASES, ALGORITHMS, SimulateConfigSerializer


class Command(ExperimentCommand):
    """Django command to simulate recovery on spatially coupled systems."""

    help = "Monte-Carlo MSE per trial, iteration and section."
    serializer_class = SimulateConfigSerializer
    name = "simulate"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--trials", type=int, help="Trials per sweep point")
        parser.add_argument("--zeta", type=float, help="Damping factor")
        parser.add_argument("--filter", choices=("lmmse", "mf", "zf"), help="Linear filter")
        parser.add_argument(
            "--algo", choices=ALGORITHMS + tuple(ALGORITHM_ALIASES), help="Algorithm"
        )

    def prepare(self, raw, options):
        overrides = {
            key: options[key]
            for key in ("trials", "zeta", "filter", "algo", "seed")
            if options.get(key) is not None
        }
        return super().prepare({**raw, **overrides}, options)

    def run(self, config, options):
        sweep = config.pop("sweep")
        points = [config]
        if sweep:
            points = []
            for point in sweep:
                merged = {**config, **point}
                if "delta" in point and "M" not in point:
                    merged.pop("M")
                points.append(validate(SimulateConfigSerializer, merged))
        config["sweep"] = sweep
        return simulate(points, self.seed_of(config, options), options.get("workers"))
