import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

from core.exceptions import DomainError

from .transforms import (
    IID_GAUSSIAN,
    ROW_ORTHOGONAL,
    coupled_limit_r_transform,
    r_transform,
)

_GL_NODES, _GL_WEIGHTS = roots_legendre(8)


class RTransform:
    """
    Callable R-transform on ``z <= 0`` with integrals ``∫₀^x R(-y) dy``.

    Used by the approximate state evolution and the potential function,
    which only ever evaluate ``R`` at nonpositive arguments.
    """

    def __init__(self, func, label, spectrum=None, closed_integral=None):
        self._func = func
        self.label = label
        self.spectrum = spectrum
        self._closed_integral = closed_integral

    def __repr__(self):
        return f"RTransform({self.label})"

    def __call__(self, z):
        return self._func(z)

    def integral(self, x):
        if x < 0:
            raise DomainError("integral upper limit must be nonnegative")
        if self._closed_integral is not None:
            return float(self._closed_integral(np.asarray(x, dtype=float)))
        value, _ = integrate.quad(
            lambda y: float(self._func(-y)), 0.0, x, epsabs=1e-12, epsrel=1e-12, limit=200
        )
        return value

    def cumulative_integral(self, xs):
        """Integrals up to every point of the nondecreasing grid ``xs``."""
        xs = np.asarray(xs, dtype=float)
        if np.any(xs < 0) or np.any(np.diff(xs) < 0):
            raise DomainError("grid must be nonnegative and nondecreasing")
        if self._closed_integral is not None:
            return np.asarray(self._closed_integral(xs), dtype=float)
        edges = np.concatenate(([0.0], xs))
        lo, hi = edges[:-1], edges[1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        values = np.asarray(self._func(-nodes), dtype=float)
        panels = half * (values @ _GL_WEIGHTS)
        return np.cumsum(panels)


def _iid_integral(delta):
    return lambda x: delta * np.log1p(x / delta)


def limit_r_transform(spec):
    """R-transform of the coupled ensemble in the infinite-width limit."""
    closed = None
    if spec.kind in (IID_GAUSSIAN, ROW_ORTHOGONAL):
        closed = _iid_integral(spec.delta)
    return RTransform(
        lambda z: coupled_limit_r_transform(spec, z),
        label=f"limit:{spec.kind}",
        spectrum=spec,
        closed_integral=closed,
    )


def spectrum_r_transform(spec):
    """R-transform of the law itself (a single uncoupled section)."""
    closed = _iid_integral(spec.delta) if spec.kind == IID_GAUSSIAN else None
    return RTransform(
        lambda z: r_transform(spec, z),
        label=f"spectrum:{spec.kind}",
        spectrum=spec,
        closed_integral=closed,
    )


def iid_r_transform(delta):
    """``R(z) = delta/(delta - z)``, the i.i.d. Gaussian R-transform."""
    if not delta > 0.0:
        raise DomainError("delta must be positive")
    return RTransform(
        lambda z: delta / (delta - np.asarray(z, dtype=float)),
        label=f"iid:{delta}",
        closed_integral=_iid_integral(delta),
    )
