"""
Spatially coupled measurement systems ``y[ell] = A[ell] x_vec[ell] + n[ell]``
with ``x_vec[ell] = sqrt(|W[ell]|) Gamma[ell] x``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ConfigError, DimError
from spectra.transforms import (
    EMPIRICAL,
    GEOMETRIC,
    IID_GAUSSIAN,
    ROW_ORTHOGONAL,
    Spectrum,
)

from .base import gamma_projector
from .sections import (
    HADAMARD,
    geometric_singular_values,
    iid_gaussian_section,
    orthogonal_section,
    row_orthogonal_singular_values,
    scaled,
)

logger = logging.getLogger(__name__)


def snr_db_to_sigma2(snr_db):
    """``snr_db = 10 log10(1/sigma²)``."""
    return 10.0 ** (-snr_db / 10.0)


@dataclass(eq=False)
class RowSection:
    ell: int
    M: int
    Nc: int
    w_min: int
    w_max: int
    operator: object
    projector: object

    @property
    def width(self):
        return self.w_max - self.w_min + 1

    @property
    def singular_values(self):
        return self.operator.s

    def signal(self, x):
        """``x_vec[ell] = sqrt(|W|) Gamma[ell] x``."""
        return math.sqrt(self.width) * self.projector.apply(x)

    def extract(self, x_vec, w):
        """Block of offset ``w`` of a section vector, undoing the ``sqrt(|W|)`` scale."""
        return x_vec[self.projector.block_of(w)] / math.sqrt(self.width)


@dataclass(eq=False)
class CoupledSystem:
    base: object
    N: int
    M: int
    ensemble: Spectrum
    sigma2: float
    sections: list
    x: np.ndarray
    y: list
    noise: list = field(repr=False)
    seed: object = None
    basis: str = HADAMARD

    @property
    def L(self):
        return self.base.L

    @property
    def W(self):
        return self.base.W

    @property
    def delta(self):
        return self.M / self.N

    def column(self, l, vector=None):
        vector = self.x if vector is None else vector
        return vector[l * self.N : (l + 1) * self.N]

    def section_spectrum(self, ell):
        """Asymptotic law of ``|W[ell]| A[ell]ᵀ A[ell]``."""
        return self.ensemble.section(self.sections[ell].width)


def _draw_operator(kind, kappa, M, Nc, width, basis, rng):
    if kind == IID_GAUSSIAN:
        rescaled = iid_gaussian_section(M, Nc, rng)
    elif kind == ROW_ORTHOGONAL:
        rescaled = orthogonal_section(row_orthogonal_singular_values(M, Nc), Nc, basis, rng)
    elif kind == GEOMETRIC:
        rescaled = orthogonal_section(geometric_singular_values(M, Nc, kappa), Nc, basis, rng)
    else:
        raise ConfigError(f"cannot draw sensing matrices for ensemble {kind!r}")
    return scaled(rescaled, 1.0 / math.sqrt(width))


def build_system(base, N, M, ensemble, prior, sigma2, seed, basis=HADAMARD):
    """
    Draw a coupled system from ``seed``.

    ``ensemble`` is a ``Spectrum`` (its kind and kappa are used; delta is
    ``M/N``) or a kind name.  Draw order: signal, then for every row section
    its matrix and its noise.
    """
    if isinstance(ensemble, str):
        ensemble = Spectrum.from_dict({"kind": ensemble, "delta": M / N})
    if ensemble.kind == EMPIRICAL:
        raise ConfigError("empirical spectra cannot be sampled")
    if not 0 < M <= N:
        raise DimError(f"need 0 < M <= N, got M={M}, N={N}")
    if sigma2 <= 0:
        raise ConfigError("noise variance must be positive")
    spectrum = Spectrum.from_dict({**ensemble.to_dict(), "delta": M / N})
    rng = np.random.default_rng(seed)
    x = prior.sample(rng, N * base.L)
    sections, y, noise = [], [], []
    for ell in range(base.rows):
        w_min, w_max = base.window(ell)
        width = w_max - w_min + 1
        nc = width * N
        operator = _draw_operator(spectrum.kind, spectrum.kappa, M, nc, width, basis, rng)
        section = RowSection(
            ell=ell,
            M=M,
            Nc=nc,
            w_min=w_min,
            w_max=w_max,
            operator=operator,
            projector=gamma_projector(base, ell, N),
        )
        n = rng.normal(scale=math.sqrt(sigma2), size=M)
        sections.append(section)
        y.append(operator.matvec(section.signal(x)) + n)
        noise.append(n)
    logger.debug(
        "built %s system L=%d W=%d N=%d M=%d", spectrum.kind, base.L, base.W, N, M
    )
    return CoupledSystem(
        base=base,
        N=N,
        M=M,
        ensemble=spectrum,
        sigma2=sigma2,
        sections=sections,
        x=x,
        y=y,
        noise=noise,
        seed=seed,
        basis=basis,
    )
