"""
Library tunables, overridable through ``settings.AMPLAB``.
"""

from django.conf import settings

DEFAULTS = {
    "SE_TOL": 1e-10,
    "SE_MAX_ITER": 1000,
    "GUARD": 1e-14,
    "GH_ORDER": 61,
    "LM_MAX_HISTORY": 64,
    "POTENTIAL_GRID": 2048,
    "INFO_POINTS_PER_DECADE": 64,
    "THRESHOLD_TOL": 1e-4,
    "WORKERS": 1,
}


def amplab_setting(name):
    """Return the configured value of ``name``, falling back to the default."""
    if name not in DEFAULTS:
        raise KeyError(f"unknown AMPLAB setting {name!r}")
    overrides = getattr(settings, "AMPLAB", {}) if settings.configured else {}
    return overrides.get(name, DEFAULTS[name])
