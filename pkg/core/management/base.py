"""
Shared plumbing of the experiment commands: configuration loading and
validation, output files and the run record.
"""

import json
import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from core.exceptions import AmpLabError
from core.io import config_digest, json_safe, load_config, write_csv, write_summary
from core.models import ExperimentRun

logger = logging.getLogger(__name__)

MISSING_KEY_STATUS = 2


def validate(serializer_class, data):
    """
    Validated copy of ``data``; a missing required key exits with status 2,
    any other problem with status 1.
    """
    serializer = serializer_class(data=data)
    try:
        serializer.is_valid(raise_exception=True)
    except ValidationError as exc:
        codes = exc.get_codes()
        if isinstance(codes, dict):
            for key, key_codes in codes.items():
                if "required" in key_codes:
                    raise CommandError(
                        f"missing config key {key!r}", returncode=MISSING_KEY_STATUS
                    ) from exc
        raise CommandError(f"invalid configuration: {exc.detail}") from exc
    return dict(serializer.validated_data)


class ExperimentCommand(BaseCommand):
    """Base for commands that turn a configuration into a CSV and a JSON summary."""

    serializer_class = None
    name = None

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="TOML or JSON configuration")
        parser.add_argument("--out", required=True, help="CSV output path")
        parser.add_argument("--seed", type=int, help="Master seed (overrides the config)")
        parser.add_argument("--workers", type=int, help="Worker threads for trials")

    def load(self, options):
        try:
            data = load_config(options["config"])
        except (AmpLabError, OSError) as exc:
            raise CommandError(str(exc)) from exc
        return data

    def seed_of(self, config, options):
        if options.get("seed") is not None:
            return options["seed"]
        return config.get("seed", 0)

    def run(self, config, options):
        """Return ``(header, rows, summary)``."""
        raise NotImplementedError

    def handle(self, *args, **options):
        raw = self.load(options)
        config = self.prepare(raw, options)
        seed = self.seed_of(config, options)
        digest = config_digest({k: v for k, v in config.items() if k != "seed"})
        try:
            header, rows, summary = self.run(config, options)
        except AmpLabError as exc:
            raise CommandError(str(exc)) from exc
        out = options["out"]
        write_csv(out, self.name, digest, seed, header, rows)
        text = write_summary(out, summary)
        ExperimentRun.objects.create(
            command=self.name,
            config_sha256=digest,
            seed=seed,
            config=config,
            summary=json_safe(json.loads(text)),
            output_path=str(out),
        )
        self.stdout.write(text, ending="")
        self.stdout.write(self.style.SUCCESS(f"{self.name}: wrote {out}"))

    def prepare(self, raw, options):
        config = validate(self.serializer_class, raw)
        if options.get("seed") is not None and "seed" in self.serializer_class().fields:
            config["seed"] = options["seed"]
        return config
