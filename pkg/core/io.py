"""
Reading experiment configurations and writing CSV/JSON results.
"""

import csv
import hashlib
import json
import logging
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from .exceptions import ConfigError

logger = logging.getLogger(__name__)


def load_config(path):
    """Parse a TOML or JSON configuration, chosen by the file extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            with path.open("rb") as handle:
                return tomllib.load(handle)
        if suffix == ".json":
            with path.open(encoding="utf-8") as handle:
                data = json.load(handle)
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: the configuration must be an object")
            return data
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: unsupported configuration format {suffix!r}")


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=_plain)


def config_digest(config):
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def _plain(value):
    """Numpy scalars and arrays as plain Python values."""
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _format(value):
    if isinstance(value, float):
        return repr(float(value))
    return value


def write_csv(path, command, digest, seed, header, rows):
    """
    Write ``rows`` under a ``#`` metadata block and a single header line.

    Floats are written with ``repr`` so reruns reproduce the bytes exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        handle.write(f"# command: {command}\n")
        handle.write(f"# config_sha256: {digest}\n")
        handle.write(f"# seed: {seed}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([_format(value) for value in row])
            count += 1
    logger.info("wrote %d rows to %s", count, path)
    return path


def summary_path(path):
    return Path(path).with_suffix(".json")


def write_summary(path, summary):
    """Pretty-print ``summary`` next to the CSV at ``path``; returns the text."""
    text = json.dumps(summary, indent=2, sort_keys=True, default=_plain) + "\n"
    target = summary_path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    return text


def json_safe(value):
    """Copy of ``value`` with non-finite floats replaced by ``None``."""
    if isinstance(value, dict):
        return {key: json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value
