"""
Asymptotic eigenvalue laws of sensing ensembles and their eta/R-transforms.

A ``Spectrum`` describes the law of the eigenvalues of ``AᵀA`` (unit mean) for
an ``M x N`` matrix with ``delta = M/N``.  The eta-transform is
``eta(z) = E[1/(1 + z λ)]`` for ``z >= 0`` and the R-transform is defined
through ``eta(w) = 1/(1 + w R(-w eta(w)))``.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, optimize
from scipy.special import comb

from core.exceptions import ConfigError, DomainError

logger = logging.getLogger(__name__)

IID_GAUSSIAN = "iid_gaussian"
ROW_ORTHOGONAL = "row_orthogonal"
GEOMETRIC = "geometric"
EMPIRICAL = "empirical"

KINDS = (IID_GAUSSIAN, ROW_ORTHOGONAL, GEOMETRIC, EMPIRICAL)

UNIT_MEAN_TOL = 5e-2
INVERSION_LIMIT = 1e12


@dataclass(frozen=True)
class Spectrum:
    """Semantic description of an eigenvalue law with unit mean."""

    kind: str
    delta: float = 1.0
    kappa: float = 1.0
    eigenvalues: tuple = field(default=(), repr=False)
    ambient_dim: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown spectrum kind {self.kind!r}")
        if self.kind == EMPIRICAL:
            lam = np.asarray(self.eigenvalues, dtype=float)
            if lam.ndim != 1 or lam.size == 0:
                raise DomainError("empirical spectrum needs a non-empty eigenvalue list")
            if np.any(lam < 0):
                raise DomainError("eigenvalues must be nonnegative")
            if self.ambient_dim < lam.size:
                raise DomainError("ambient_dim must be at least the number of eigenvalues")
            mean = lam.sum() / self.ambient_dim
            if abs(mean - 1.0) > UNIT_MEAN_TOL:
                raise DomainError(f"empirical spectrum has mean {mean:.4g}, expected 1")
            rank = int(np.count_nonzero(lam > 0))
            object.__setattr__(self, "delta", rank / self.ambient_dim)
            return
        if not 0.0 < self.delta <= 1.0:
            raise DomainError(f"delta must lie in (0, 1], got {self.delta}")
        if self.kappa < 1.0:
            raise DomainError(f"kappa must be at least 1, got {self.kappa}")

    # Constructors

    @classmethod
    def iid_gaussian(cls, delta):
        return cls(IID_GAUSSIAN, delta=float(delta))

    @classmethod
    def row_orthogonal(cls, delta):
        return cls(ROW_ORTHOGONAL, delta=float(delta))

    @classmethod
    def geometric(cls, delta, kappa):
        """Singular values geometrically spaced with condition number ``kappa``."""
        if kappa == 1.0:
            return cls.row_orthogonal(delta)
        return cls(GEOMETRIC, delta=float(delta), kappa=float(kappa))

    @classmethod
    def empirical(cls, eigenvalues, ambient_dim):
        lam = np.asarray(eigenvalues, dtype=float)
        return cls(EMPIRICAL, eigenvalues=tuple(lam.tolist()), ambient_dim=int(ambient_dim))

    @classmethod
    def from_matrix(cls, matrix):
        """Empirical law of ``AᵀA`` for a dense matrix ``A``."""
        matrix = np.asarray(matrix, dtype=float)
        singular = np.linalg.svd(matrix, compute_uv=False)
        return cls.empirical(singular**2, matrix.shape[1])

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind")
        if kind == EMPIRICAL:
            return cls.empirical(data["eigenvalues"], data["ambient_dim"])
        if kind == GEOMETRIC:
            return cls.geometric(data["delta"], data.get("kappa", 1.0))
        if kind in (IID_GAUSSIAN, ROW_ORTHOGONAL):
            return cls(kind, delta=float(data["delta"]))
        raise ConfigError(f"unknown spectrum kind {kind!r}")

    def to_dict(self):
        if self.kind == EMPIRICAL:
            return {
                "kind": self.kind,
                "eigenvalues": list(self.eigenvalues),
                "ambient_dim": self.ambient_dim,
            }
        data = {"kind": self.kind, "delta": self.delta}
        if self.kind == GEOMETRIC:
            data["kappa"] = self.kappa
        return data

    def section(self, width):
        """Law of ``|W| AᵀA`` for a row section spanning ``width`` column sections."""
        if width < 1:
            raise DomainError("section width must be positive")
        if self.kind == EMPIRICAL:
            raise ConfigError("empirical spectra cannot be rescaled to another width")
        if width == 1:
            return self
        return Spectrum(self.kind, delta=self.delta / width, kappa=self.kappa)

    # Geometric law helpers: log-uniform on [lo, hi] with hi/lo = kappa².

    @cached_property
    def _geometric_c(self):
        return 2.0 * math.log(self.kappa) / self.delta

    @cached_property
    def _geometric_support(self):
        c = self._geometric_c
        hi = c / (1.0 - self.kappa**-2)
        return hi / self.kappa**2, hi

    @cached_property
    def _positive_eigenvalues(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        return lam[lam > 0]


def _as_output(values, scalar):
    return float(values) if scalar else values


def one_minus_eta(spec, z):
    """``1 - eta(z)`` without cancellation for small ``z``."""
    z = np.asarray(z, dtype=float)
    if spec.kind == IID_GAUSSIAN:
        return 1.0 - _eta_iid(spec.delta, z)
    if spec.kind == ROW_ORTHOGONAL:
        delta = spec.delta
        return delta * z / (delta + z)
    if spec.kind == GEOMETRIC:
        c = spec._geometric_c
        k2 = spec.kappa**2
        return np.log1p((k2 - 1.0) * c * z / (k2 - 1.0 + c * z)) / c
    lam = spec._positive_eigenvalues
    zl = np.multiply.outer(z, lam)
    return (zl / (1.0 + zl)).sum(axis=-1) / spec.ambient_dim


def _eta_iid(delta, z):
    b = delta + z * delta - z
    disc = np.sqrt(b * b + 4.0 * z * delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        positive = 2.0 * delta / (b + disc)
        negative = (disc - b) / (2.0 * z)
    return np.where(b >= 0, positive, negative)


def eta_transform(spec, z):
    """Evaluate ``eta(z)`` for ``z >= 0``; ``eta(0) = 1``."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("eta-transform is evaluated on z >= 0")
    if spec.kind == IID_GAUSSIAN:
        values = _eta_iid(spec.delta, z)
    else:
        values = 1.0 - one_minus_eta(spec, z)
    return _as_output(values, scalar)


def z_min(spec):
    """Infimum of the R-transform domain, ``-sup_w w eta(w)``."""
    if spec.delta < 1.0:
        return -math.inf
    if spec.kind == IID_GAUSSIAN:
        return -math.inf
    if spec.kind == ROW_ORTHOGONAL:
        return -1.0
    if spec.kind == GEOMETRIC:
        k2 = spec.kappa**2
        return -(((k2 - 1.0) / (spec.kappa * spec._geometric_c)) ** 2)
    return -float(np.mean(1.0 / np.asarray(spec.eigenvalues)))


def _r_iid(delta, z):
    return delta / (delta - z)


def _r_row_orthogonal(delta, z):
    if delta == 1.0:
        return np.ones_like(z)
    b = delta + z
    disc = np.sqrt(b * b - 4.0 * (1.0 - delta) * delta * z)
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = -2.0 * delta * z / (disc + b)
        direct = (disc - b) / (2.0 * (1.0 - delta))
    w = np.where(b > 0, stable, direct)
    return delta / (delta + w * (1.0 - delta))


def _invert_scalar(spec, z):
    """Solve ``w eta(w) = -z`` for ``w >= 0`` and return ``R(z)``."""
    if z == 0.0:
        return 1.0 if spec.kind != EMPIRICAL else float(moments(spec, 1)[0])

    def residual(w):
        return w * (1.0 - float(one_minus_eta(spec, w))) + z

    hi = max(1.0, -z)
    while residual(hi) <= 0.0:
        hi *= 2.0
        if hi > INVERSION_LIMIT:
            raise DomainError(f"z={z} is outside the R-transform domain")
    w = optimize.brentq(residual, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    return float(one_minus_eta(spec, w)) / (-z)


def r_transform(spec, z):
    """Evaluate ``R(z)`` on ``z_min < z <= 0``."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    if np.any(z > 0):
        raise DomainError("R-transform is evaluated on z <= 0")
    if np.any(z <= z_min(spec)):
        raise DomainError(f"argument at or below z_min={z_min(spec)}")
    if spec.kind == IID_GAUSSIAN:
        values = _r_iid(spec.delta, z)
    elif spec.kind == ROW_ORTHOGONAL:
        values = _r_row_orthogonal(spec.delta, z)
    else:
        flat = [_invert_scalar(spec, float(v)) for v in z.ravel()]
        values = np.asarray(flat, dtype=float).reshape(z.shape)
    return _as_output(values, scalar)


def coupled_limit_r_transform(spec, z):
    """
    R-transform of the spatially coupled ensemble in the limit of infinite
    coupling width: ``R(z) = (eta(-z) - 1)/z``.

    For i.i.d. Gaussian and orthogonal-row ensembles this is ``delta/(delta - z)``;
    the geometric ensemble has the closed form
    ``-(1/(C z)) ln((κ² - 1 - κ² C z)/(κ² - 1 - C z))`` with ``C = 2 ln κ / δ``.
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    if np.any(z > 0):
        raise DomainError("R-transform is evaluated on z <= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        if spec.kind in (IID_GAUSSIAN, ROW_ORTHOGONAL):
            values = _r_iid(spec.delta, z)
        elif spec.kind == GEOMETRIC:
            c = spec._geometric_c
            k2 = spec.kappa**2
            values = -np.log((k2 - 1.0 - k2 * c * z) / (k2 - 1.0 - c * z)) / (c * z)
        else:
            values = one_minus_eta(spec, -z) / (-z)
    values = np.where(z == 0.0, float(moments(spec, 1)[0]), values)
    return _as_output(values, scalar)


def geometric_limit_integral(spec, z):
    """Quadrature form ``∫₁^{κ²} dy / (κ² - 1 - C z y)`` of the geometric limit."""
    if spec.kind != GEOMETRIC:
        raise ConfigError("geometric_limit_integral needs a geometric spectrum")
    c = spec._geometric_c
    k2 = spec.kappa**2
    value, _ = integrate.quad(
        lambda y: 1.0 / (k2 - 1.0 - c * z * y), 1.0, k2, epsabs=1e-10
    )
    return value


def moments(spec, k_max):
    """Moments ``mu_1 .. mu_k_max`` of the eigenvalue law."""
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    ks = range(1, k_max + 1)
    delta = spec.delta
    if spec.kind == IID_GAUSSIAN:
        # Narayana polynomials in 1/delta
        return [
            float(
                sum(
                    comb(k, j, exact=True) * comb(k - 1, j, exact=True) / (j + 1) * delta**-j
                    for j in range(k)
                )
            )
            for k in ks
        ]
    if spec.kind == ROW_ORTHOGONAL:
        return [delta ** (1 - k) for k in ks]
    if spec.kind == GEOMETRIC:
        c = spec._geometric_c
        lo, hi = spec._geometric_support
        return [(hi**k - lo**k) / (c * k) for k in ks]
    lam = np.asarray(spec.eigenvalues, dtype=float)
    return [float(np.sum(lam**k) / spec.ambient_dim) for k in ks]


def inverse_moment(spec):
    """``E[1/λ ; λ > 0]`` over the law, needed by the zero-forcing filter."""
    delta = spec.delta
    if spec.kind == IID_GAUSSIAN:
        if delta >= 1.0:
            raise DomainError("zero forcing is unbounded for a square i.i.d. Gaussian matrix")
        return delta**2 / (1.0 - delta)
    if spec.kind == ROW_ORTHOGONAL:
        return delta**2
    if spec.kind == GEOMETRIC:
        lo, hi = spec._geometric_support
        return (1.0 / lo - 1.0 / hi) / spec._geometric_c
    return float(np.sum(1.0 / spec._positive_eigenvalues) / spec.ambient_dim)


def spectral_mean(spec, func):
    """
    Expectation of ``func(λ)`` under the law, including the atom at zero.

    ``func`` must accept numpy arrays.
    """
    delta = spec.delta
    zero_mass = (1.0 - delta) * float(func(np.zeros(1))[0]) if delta < 1.0 else 0.0
    if spec.kind == ROW_ORTHOGONAL:
        return zero_mass + delta * float(func(np.array([1.0 / delta]))[0])
    if spec.kind == EMPIRICAL:
        lam = spec._positive_eigenvalues
        zeros = spec.ambient_dim - lam.size
        total = np.sum(func(lam)) + zeros * float(func(np.zeros(1))[0])
        return float(total / spec.ambient_dim)
    if spec.kind == GEOMETRIC:
        lo, hi = spec._geometric_support
        value, _ = integrate.quad(
            lambda u: float(func(np.array([math.exp(u)]))[0]),
            math.log(lo),
            math.log(hi),
            epsabs=1e-13,
            epsrel=1e-12,
            limit=200,
        )
        return zero_mass + delta * value / (2.0 * math.log(spec.kappa))
    # Marchenko-Pastur law of the nonzero eigenvalues, rescaled by 1/delta
    lo = (1.0 - math.sqrt(delta)) ** 2
    hi = (1.0 + math.sqrt(delta)) ** 2
    if lo < 1e-14:
        value, _ = integrate.quad(
            lambda x: float(func(np.array([x / delta]))[0]) / (2.0 * math.pi),
            0.0,
            hi,
            weight="alg",
            wvar=(-0.5, 0.5),
            epsabs=1e-13,
            epsrel=1e-12,
        )
    else:
        value, _ = integrate.quad(
            lambda x: float(func(np.array([x / delta]))[0]) / (2.0 * math.pi * x),
            lo,
            hi,
            weight="alg",
            wvar=(0.5, 0.5),
            epsabs=1e-13,
            epsrel=1e-12,
        )
    return zero_mass + value


@dataclass(frozen=True)
class IdentityReport:
    r0: float
    r_prime: float
    mu1: float
    mu2: float

    @property
    def r0_residual(self):
        return abs(self.r0 - self.mu1)

    @property
    def r_prime_residual(self):
        return abs(self.r_prime - (self.mu2 - self.mu1**2))


def r_transform_identities_check(spec, h=1e-4):
    """
    Compare ``R(0)`` with ``mu_1`` and ``R'(0)`` with ``mu_2 - mu_1²``.

    R is only defined for ``z <= 0`` so the derivative is the one-sided
    second-order difference ``(3R(0) - 4R(-h) + R(-2h)) / (2h)``.
    """
    mu1, mu2 = moments(spec, 2)
    r0 = r_transform(spec, 0.0)
    r_prime = (3.0 * r0 - 4.0 * r_transform(spec, -h) + r_transform(spec, -2.0 * h)) / (2.0 * h)
    return IdentityReport(r0=r0, r_prime=r_prime, mu1=mu1, mu2=mu2)
