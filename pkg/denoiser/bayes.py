"""
Bayes-optimal scalar denoisers for the observation ``u = x + z``,
``z ~ N(0, v)``, and the MMSE / mutual-information functions of the
equivalent channel ``sqrt(s) x + N(0, 1)``.
"""

import logging
import math
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import expit, roots_hermite, roots_legendre

from core.conf import amplab_setting
from core.exceptions import DomainError

logger = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = roots_legendre(8)


@lru_cache(maxsize=8)
def hermite_rule(order):
    """Nodes and weights for ``E[g(t)]``, ``t ~ N(0, 1)``."""
    nodes, weights = roots_hermite(order)
    return np.sqrt(2.0) * nodes, weights / np.sqrt(np.pi)


def _check_variance(v):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("noise variance must be positive")
    return v


def _output(values, *args):
    return float(values) if all(np.ndim(a) == 0 for a in args) else values


def _components(prior, u, v):
    """Posterior support probability and the Gaussian shrinkage factor."""
    a = prior.nonzero_variance + v
    c = prior.nonzero_variance / a
    log_odds = (
        math.log(prior.rho)
        - math.log1p(-prior.rho)
        - 0.5 * np.log(a / v)
        + 0.5 * u * u * c / v
    )
    return expit(log_odds), c


def posterior_support(prior, u, v):
    """Probability that the signal entry is nonzero given ``u``."""
    u = np.asarray(u, dtype=float)
    v = _check_variance(v)
    if prior.is_gaussian:
        return _output(np.ones(np.broadcast(u, v).shape), u, v)
    pi, _ = _components(prior, u, v)
    return _output(pi, u, v)


def denoise(prior, u, v):
    """Posterior mean ``E[x | u]``."""
    u = np.asarray(u, dtype=float)
    v = _check_variance(v)
    if prior.is_gaussian:
        return _output(u / (1.0 + v), u, v)
    pi, c = _components(prior, u, v)
    return _output(pi * c * u, u, v)


def posterior_variance(prior, u, v):
    """Posterior variance ``Var(x | u)``; equals ``v * denoise_derivative``."""
    u = np.asarray(u, dtype=float)
    v = _check_variance(v)
    if prior.is_gaussian:
        return _output(np.broadcast_to(v / (1.0 + v), np.broadcast(u, v).shape).copy(), u, v)
    pi, c = _components(prior, u, v)
    return _output(pi * c * v + pi * (1.0 - pi) * (c * u) ** 2, u, v)


def denoise_derivative(prior, u, v):
    """Derivative of the posterior mean with respect to ``u``."""
    u = np.asarray(u, dtype=float)
    v = _check_variance(v)
    if prior.is_gaussian:
        return _output(np.broadcast_to(1.0 / (1.0 + v), np.broadcast(u, v).shape).copy(), u, v)
    pi, c = _components(prior, u, v)
    return _output(pi * c + pi * (1.0 - pi) * (c * u) ** 2 / v, u, v)


def mmse(prior, s):
    """
    ``E[(x - E[x | sqrt(s) x + z])²]``.

    For the Bernoulli-Gaussian prior
    ``MMSE = rho c v + (1 - rho) c² v E_t[t² pi(sqrt(v) t)]`` with ``v = 1/s``,
    so the only quadrature runs over the zero component, where the integrand
    is smooth.
    """
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("snr must be nonnegative")
    if prior.is_gaussian:
        return _output(1.0 / (1.0 + s), s) if scalar else 1.0 / (1.0 + s)
    nodes, weights = hermite_rule(amplab_setting("GH_ORDER"))
    with np.errstate(divide="ignore"):
        v = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), np.inf)
    finite = np.isfinite(v)
    v_safe = np.where(finite, v, 1.0)
    u = np.sqrt(v_safe)[..., None] * nodes
    pi, c = _components(prior, u, v_safe[..., None])
    tail = (nodes**2 * pi) @ weights
    c = c[..., 0]
    values = prior.rho * c * v_safe + (1.0 - prior.rho) * c * c * v_safe * tail
    values = np.where(finite, values, 1.0)
    return float(values) if scalar else values


def _integrate_mmse(prior, lo, hi):
    """``∫_lo^hi MMSE`` split on decades so quad sees a smooth integrand."""
    if hi <= lo:
        return 0.0
    edges = [lo]
    edge = max(lo, 1e-3) if lo > 0 else 1e-3
    while edge * 10.0 < hi:
        edge *= 10.0
        if edge > edges[-1]:
            edges.append(edge)
    edges.append(hi)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        value, _ = integrate.quad(
            lambda t: mmse(prior, t), a, b, epsabs=1e-13, epsrel=1e-12, limit=200
        )
        total += value
    return total


def mutual_info(prior, s):
    """``I(s) = ½ ∫₀ˢ MMSE(t) dt``."""
    if s < 0:
        raise DomainError("snr must be nonnegative")
    if s == 0:
        return 0.0
    return 0.5 * _integrate_mmse(prior, 0.0, float(s))


class InformationTable:
    """
    ``I(s)`` on ``[0, s_max]`` tabulated on a logarithmic grid and read back
    through a cubic spline.  Built once, then read-only.
    """

    def __init__(self, prior, s_max, points_per_decade=None):
        if s_max <= 0:
            raise DomainError("s_max must be positive")
        points_per_decade = points_per_decade or amplab_setting("INFO_POINTS_PER_DECADE")
        self.prior = prior
        self.s_max = float(s_max)
        s_lo = min(1e-8, self.s_max / 10.0)
        decades = math.log10(self.s_max / s_lo)
        grid = np.geomspace(s_lo, self.s_max, int(math.ceil(decades * points_per_decade)) + 1)
        self.nodes = np.concatenate(([0.0], grid))
        lo, hi = self.nodes[:-1], self.nodes[1:]
        half = 0.5 * (hi - lo)
        points = 0.5 * (hi + lo)[:, None] + half[:, None] * _GL_NODES[None, :]
        values = mmse(prior, points)
        panels = half * (values @ _GL_WEIGHTS)
        self.values = 0.5 * np.concatenate(([0.0], np.cumsum(panels)))
        self._spline = CubicSpline(self.nodes, self.values)
        logger.debug("information table for %s up to s=%g", prior, self.s_max)

    def __call__(self, s):
        scalar = np.ndim(s) == 0
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("snr must be nonnegative")
        inside = np.clip(s, 0.0, self.s_max)
        values = self._spline(inside)
        beyond = s > self.s_max
        if np.any(beyond):
            extra = [0.5 * _integrate_mmse(self.prior, self.s_max, t) for t in s[beyond]]
            values = np.array(values, dtype=float)
            values[beyond] += extra
        return float(values) if scalar else values


@lru_cache(maxsize=32)
def information_table(prior, s_max):
    return InformationTable(prior, s_max)


def error_covariance(prior, v_early, v_late, cov, exact_nested=True):
    """
    ``E[(x - f(x + z1; v_early)) (x - f(x + z2; v_late))]`` for jointly
    Gaussian noise with covariance ``cov``.

    When ``cov == min(v_early, v_late)`` the noisier observation is a degraded
    copy of the other one and the value is the MMSE at the smaller variance.
    """
    v1 = float(_check_variance(v_early))
    v2 = float(_check_variance(v_late))
    if exact_nested and abs(cov - min(v1, v2)) <= 1e-12 * min(v1, v2):
        return mmse(prior, 1.0 / min(v1, v2))
    if prior.is_gaussian:
        c1, c2 = 1.0 / (1.0 + v1), 1.0 / (1.0 + v2)
        return 1.0 - c1 - c2 + c1 * c2 * (1.0 + cov)
    nodes, weights = hermite_rule(amplab_setting("GH_ORDER"))
    l21 = cov / math.sqrt(v1)
    l22 = math.sqrt(max(v2 - l21 * l21, 0.0))
    z1 = math.sqrt(v1) * nodes[:, None]
    z2 = l21 * nodes[:, None] + l22 * nodes[None, :]
    w2 = weights[:, None] * weights[None, :]

    def expected_product(x):
        e1 = x - denoise(prior, x + z1, v1)
        e2 = x - denoise(prior, x + z2, v2)
        return np.sum(w2 * e1 * e2)

    zero = expected_product(0.0)
    spread = math.sqrt(prior.nonzero_variance) * nodes
    nonzero = sum(w * expected_product(x) for x, w in zip(spread, weights))
    return (1.0 - prior.rho) * zero + prior.rho * nonzero
