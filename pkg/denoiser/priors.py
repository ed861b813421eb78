from dataclasses import dataclass

import numpy as np

from core.exceptions import ConfigError, DomainError

BERNOULLI_GAUSSIAN = "bg"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class Prior:
    """
    Separable signal prior with unit second moment.

    The Bernoulli-Gaussian prior draws ``N(0, 1/rho)`` with probability
    ``rho`` and zero otherwise.
    """

    kind: str = BERNOULLI_GAUSSIAN
    rho: float = 1.0

    def __post_init__(self):
        if self.kind not in (BERNOULLI_GAUSSIAN, GAUSSIAN):
            raise ConfigError(f"unknown prior {self.kind!r}")
        if self.kind == GAUSSIAN:
            object.__setattr__(self, "rho", 1.0)
        if not 0.0 < self.rho <= 1.0:
            raise DomainError(f"rho must lie in (0, 1], got {self.rho}")

    @classmethod
    def bernoulli_gaussian(cls, rho):
        return cls(BERNOULLI_GAUSSIAN, float(rho))

    @classmethod
    def gaussian(cls):
        return cls(GAUSSIAN)

    @classmethod
    def from_dict(cls, data):
        kind = data.get("prior", BERNOULLI_GAUSSIAN)
        if kind == GAUSSIAN:
            return cls.gaussian()
        return cls.bernoulli_gaussian(data["rho"])

    def to_dict(self):
        if self.kind == GAUSSIAN:
            return {"prior": GAUSSIAN}
        return {"prior": BERNOULLI_GAUSSIAN, "rho": self.rho}

    @property
    def is_gaussian(self):
        return self.kind == GAUSSIAN or self.rho == 1.0

    @property
    def info_dimension(self):
        """Rényi information dimension: rho for BG, 1 for a Gaussian."""
        return 1.0 if self.is_gaussian else self.rho

    @property
    def nonzero_variance(self):
        return 1.0 / self.rho

    def sample(self, rng, size):
        if self.is_gaussian:
            return rng.normal(size=size)
        support = rng.random(size) < self.rho
        values = rng.normal(scale=np.sqrt(self.nonzero_variance), size=size)
        return np.where(support, values, 0.0)
