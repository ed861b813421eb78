"""
Validation of experiment configurations and the serializer of recorded runs.

Configurations are flat dicts; every serializer rejects keys it does not
declare, so a misspelled key never silently falls back to a default.
"""

from rest_framework import serializers
from rest_framework.exceptions import ErrorDetail

from core.conf import amplab_setting
from coupling.base import uniform_base
from coupling.sections import BASES, HADAMARD, is_power_of_two
from denoiser.priors import BERNOULLI_GAUSSIAN, GAUSSIAN
from evolution.recursions import BAYES, KINDS
from oamp.algorithm import FILTERS, LMMSE
from spectra.transforms import GEOMETRIC, IID_GAUSSIAN, ROW_ORTHOGONAL

from .models import ExperimentRun

ENSEMBLES = (IID_GAUSSIAN, ROW_ORTHOGONAL, GEOMETRIC)
PRIORS = (BERNOULLI_GAUSSIAN, GAUSSIAN)
OAMP = "oamp"
LM_OAMP = "lm-oamp"
AMP = "amp"
ALGORITHMS = (OAMP, LM_OAMP, AMP)
# alternative spellings
ALGORITHM_ALIASES = {"lmoamp": LM_OAMP}
R_SOURCES = ("limit", "section")


def missing(key):
    return serializers.ValidationError(
        {key: [ErrorDetail("This field is required.", code="required")]}
    )


class StrictSerializer(serializers.Serializer):
    """Serializer that refuses undeclared keys."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: ["Unknown configuration key."] for key in unknown}
                )
        return super().to_internal_value(data)


class ModelConfigSerializer(StrictSerializer):
    """Asymptotic system: coupling, ensemble, prior and noise level."""

    L = serializers.IntegerField(min_value=1, default=1)
    W = serializers.IntegerField(min_value=0, default=0)
    delta = serializers.FloatField(min_value=0.0, max_value=1.0)
    ensemble = serializers.ChoiceField(choices=ENSEMBLES)
    kappa = serializers.FloatField(min_value=1.0, default=1.0)
    prior = serializers.ChoiceField(choices=PRIORS, default=BERNOULLI_GAUSSIAN)
    rho = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    snr_db = serializers.FloatField()

    def validate(self, data):
        if data.get("prior") == BERNOULLI_GAUSSIAN and "rho" not in data:
            raise missing("rho")
        if data["W"] >= data["L"]:
            raise serializers.ValidationError({"W": ["Coupling width must be smaller than L."]})
        if "delta" in data and data["delta"] <= 0.0:
            raise serializers.ValidationError({"delta": ["Compression rate must be positive."]})
        return data


class SystemConfigSerializer(ModelConfigSerializer):
    """Finite system: either ``M`` or ``delta`` fixes the rows per section."""

    delta = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    N = serializers.IntegerField(min_value=1)
    M = serializers.IntegerField(min_value=1, required=False)
    basis = serializers.ChoiceField(choices=BASES, default=HADAMARD)
    seed = serializers.IntegerField(min_value=0, default=0)

    def validate(self, data):
        data = super().validate(data)
        if "M" not in data and "delta" not in data:
            raise missing("M")
        if "M" in data and "delta" in data:
            raise serializers.ValidationError({"delta": ["Give either M or delta, not both."]})
        if "M" not in data:
            data["M"] = max(1, round(data.pop("delta") * data["N"]))
        if data["M"] > data["N"]:
            raise serializers.ValidationError({"M": ["M must not exceed N."]})
        if data["basis"] == HADAMARD and data["ensemble"] in (ROW_ORTHOGONAL, GEOMETRIC):
            base = uniform_base(data["L"], data["W"])
            for ell, width in enumerate(base.widths()):
                columns = int(width) * data["N"]
                if not is_power_of_two(columns):
                    raise serializers.ValidationError(
                        {
                            "basis": [
                                f"hadamard basis needs power-of-two section widths, row "
                                f"section {ell} has {columns} columns; use dct or haar."
                            ]
                        }
                    )
        return data


class SimulateConfigSerializer(SystemConfigSerializer):
    algo = serializers.ChoiceField(choices=ALGORITHMS + tuple(ALGORITHM_ALIASES), default=OAMP)
    filter = serializers.ChoiceField(choices=FILTERS, default=LMMSE)
    T = serializers.IntegerField(min_value=1, default=100)
    trials = serializers.IntegerField(min_value=1, default=1)
    zeta = serializers.FloatField(min_value=0.0, max_value=1.0, default=1.0)
    tol = serializers.FloatField(min_value=0.0, required=False)
    sweep = serializers.ListField(child=serializers.DictField(), default=list)

    def validate_algo(self, value):
        return ALGORITHM_ALIASES.get(value, value)

    def validate_zeta(self, value):
        if value <= 0.0:
            raise serializers.ValidationError("Damping factor must be positive.")
        return value

    def validate(self, data):
        data = super().validate(data)
        cap = amplab_setting("LM_MAX_HISTORY")
        if data["algo"] == LM_OAMP and data["T"] > cap:
            raise serializers.ValidationError(
                {"T": [f"LM-OAMP keeps at most {cap} iterations of history."]}
            )
        return data


class SeConfigSerializer(ModelConfigSerializer):
    kind = serializers.ChoiceField(choices=KINDS, default=BAYES)
    filter = serializers.ChoiceField(choices=FILTERS, default=LMMSE)
    T = serializers.IntegerField(min_value=1, default=1000)
    tol = serializers.FloatField(min_value=0.0, required=False)
    init_v = serializers.FloatField(min_value=0.0, required=False)


class PotentialConfigSerializer(ModelConfigSerializer):
    grid_n = serializers.IntegerField(min_value=32, required=False)
    r_source = serializers.ChoiceField(choices=R_SOURCES, default="limit")
    snr_db_list = serializers.ListField(child=serializers.FloatField(), required=False)


class ThresholdConfigSerializer(ModelConfigSerializer):
    delta = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    kappas = serializers.ListField(
        child=serializers.FloatField(min_value=1.0), required=False, allow_empty=False
    )
    Ws = serializers.ListField(
        child=serializers.IntegerField(min_value=0), required=False, allow_empty=False
    )
    T = serializers.IntegerField(min_value=1, required=False)
    tol = serializers.FloatField(min_value=0.0, required=False)
    bracket = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0), min_length=2, max_length=2,
        required=False,
    )
    grid_n = serializers.IntegerField(min_value=32, required=False)
    potential = serializers.BooleanField(default=True)

    def validate(self, data):
        data = super().validate(data)
        for width in data.get("Ws", []):
            if width >= data["L"]:
                raise serializers.ValidationError({"Ws": ["Every W must be smaller than L."]})
        return data


class SpectrumConfigSerializer(StrictSerializer):
    ensemble = serializers.ChoiceField(choices=ENSEMBLES)
    delta = serializers.FloatField(min_value=0.0, max_value=1.0)
    kappa = serializers.FloatField(min_value=1.0, default=1.0)
    width = serializers.IntegerField(min_value=1, default=1)
    points = serializers.IntegerField(min_value=2, default=21)
    z_max = serializers.FloatField(min_value=0.0, default=10.0)


class ExperimentRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = ExperimentRun
        fields = [
            "id",
            "command",
            "config_sha256",
            "seed",
            "config",
            "summary",
            "output_path",
            "created_at",
        ]
        read_only_fields = fields
