"""
Replica-symmetric potential, the potential function of the coupled system and
the compression-rate thresholds read off both.

``F(E) = ∫₀^{g(E)} MMSE(s) ds + ∫₀^E g(z) dz - E g(E)`` with
``g(z) = R(-z/σ²)/σ²``; its stationary points are the fixed points
``E = MMSE(g(E))``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from core.conf import amplab_setting
from core.exceptions import AmpLabError, DegenerateBracket, DomainError
from coupling.base import uniform_base
from denoiser.bayes import information_table, mmse, mutual_info
from evolution.recursions import BAYES, CoupledModel, run_se
from spectra.rtransform import limit_r_transform
from spectra.transforms import Spectrum

logger = logging.getLogger(__name__)

MIN_GRID = 32
TIE_TOL = 1e-6
E_FLOOR = 1e-4
SCAN_POINTS = 9
GOOD_INIT = 1e-6
SATURATION_TOL = 1e-6
# lower end of the default bracket when the prior is not sparse
DENSE_FLOOR = 0.01


def sinr_map(R, sigma2):
    """``g(E) = R(-E/σ²)/σ²``."""

    def g(E):
        return np.asarray(R(-np.asarray(E, dtype=float) / sigma2), dtype=float) / sigma2

    return g


def rs_potential(prior, R, sigma2, E, s, information=None):
    """
    ``I(s) + ½ ∫₀^{E/σ²} R(-z) dz - sE/2``.

    Normalized so that ``f_RS(E, g(E)) = F(E)/2``; the stationarity
    conditions ``E = MMSE(s)`` and ``s = g(E)`` are unaffected.
    """
    if not 0.0 <= E <= 1.0:
        raise DomainError(f"E must lie in [0, 1], got {E}")
    if s < 0:
        raise DomainError("s must be nonnegative")
    information = information or (lambda snr: mutual_info(prior, snr))
    return float(information(s)) + 0.5 * R.integral(E / sigma2) - 0.5 * s * E


@dataclass(frozen=True)
class Minimizer:
    E: float
    F: float
    s: float
    residual: float


@dataclass
class PotentialCurve:
    E_grid: np.ndarray
    F_values: np.ndarray
    minimizers: list
    delta: float
    sigma2: float
    prior: object = field(default=None, repr=False)
    R: object = field(default=None, repr=False)
    information: object = field(default=None, repr=False)

    @property
    def unique(self):
        return len(self.minimizers) == 1

    @property
    def global_minimizer(self):
        return min(self.minimizers, key=lambda m: m.F)

    @property
    def E_opt(self):
        return self.global_minimizer.E

    @property
    def s_opt(self):
        return self.global_minimizer.s

    @property
    def ties(self):
        """Minimizers whose potential is within ``TIE_TOL`` of the global one."""
        best = self.global_minimizer
        return [m for m in self.minimizers if abs(m.F - best.F) <= TIE_TOL]

    @property
    def optimal_is_smallest(self):
        """Global minimizer unique (no tie) and equal to the smallest-E minimizer."""
        return len(self.ties) == 1 and self.global_minimizer is self.minimizers[0]

    def sinr(self, E):
        return sinr_map(self.R, self.sigma2)(E)

    def potential(self, E):
        g = float(self.sinr(E))
        return 2.0 * float(self.information(g)) + self.R.integral(E / self.sigma2) - E * g

    def to_dict(self):
        return {
            "delta": self.delta,
            "sigma2": self.sigma2,
            "unique": self.unique,
            "E_opt": self.E_opt,
            "s_opt": self.s_opt,
            "minimizers": [{"E": m.E, "F": m.F, "s": m.s} for m in self.minimizers],
            "ties": len(self.ties),
        }


def _delta_of(R, delta):
    if delta is not None:
        return float(delta)
    spectrum = getattr(R, "spectrum", None)
    return spectrum.delta if spectrum is not None else float("nan")


def energy_grid(sigma2, grid_n):
    """``0`` followed by a log grid from ``E_FLOOR·σ²`` to 1."""
    floor = min(E_FLOOR * sigma2, E_FLOOR)
    return np.concatenate(([0.0], np.geomspace(floor, 1.0, grid_n - 1)))


def potential_curve(prior, R, sigma2, grid_n=None, delta=None):
    """
    Sample ``F`` on ``[0, 1]`` and locate its local minimizers.

    Minimizers are the roots of ``E - MMSE(g(E))`` where it turns from
    negative to positive, since ``F'(E) = -g'(E) (E - MMSE(g(E)))`` and
    ``g`` is nonincreasing.
    """
    grid_n = grid_n or amplab_setting("POTENTIAL_GRID")
    if grid_n < MIN_GRID:
        raise DomainError(f"grid_n must be at least {MIN_GRID}")
    if sigma2 <= 0:
        raise DomainError("noise variance must be positive")
    g = sinr_map(R, sigma2)
    E = energy_grid(sigma2, grid_n)
    s = g(E)
    information = information_table(prior, float(np.max(s)))
    F = 2.0 * information(s) + R.cumulative_integral(E / sigma2) - E * s
    drift = E - mmse(prior, s)

    def stationarity(e):
        return e - float(mmse(prior, float(g(e))))

    minimizers = []
    for i in np.flatnonzero((drift[:-1] < 0) & (drift[1:] >= 0)):
        root = optimize.brentq(stationarity, E[i], E[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        snr = float(g(root))
        value = 2.0 * float(information(snr)) + R.integral(root / sigma2) - root * snr
        minimizers.append(
            Minimizer(E=root, F=value, s=snr, residual=abs(stationarity(root)))
        )
    curve = PotentialCurve(
        E_grid=E,
        F_values=F,
        minimizers=minimizers,
        delta=_delta_of(R, delta),
        sigma2=sigma2,
        prior=prior,
        R=R,
        information=information,
    )
    if len(curve.ties) > 1:
        logger.warning(
            "potential at delta=%s has %d minimizers within %g of the global one",
            curve.delta,
            len(curve.ties),
            TIE_TOL,
        )
    return curve


@dataclass
class ThresholdResult:
    delta: float
    bracket: tuple
    at_floor: bool = False
    monotone: bool = True
    evaluations: list = field(default_factory=list, repr=False)
    rate_adjusted: float = None

    def to_dict(self):
        data = {
            "delta": self.delta,
            "bracket": list(self.bracket),
            "at_floor": self.at_floor,
            "monotone": self.monotone,
            "evaluations": len(self.evaluations),
        }
        if self.rate_adjusted is not None:
            data["rate_adjusted"] = self.rate_adjusted
        return data


def bisect_threshold(predicate, lo, hi, tol=None, scan_points=SCAN_POINTS):
    """
    Infimum of ``delta`` such that ``predicate`` holds on ``(delta, hi]``.

    A coarse scan locates the last failing point; if the verdicts are not of
    the form fail..fail pass..pass the result is flagged non-monotone.
    """
    tol = tol or amplab_setting("THRESHOLD_TOL")
    if not 0.0 < lo < hi <= 1.0:
        raise DegenerateBracket(f"bracket [{lo}, {hi}] must satisfy 0 < lo < hi <= 1")
    grid = np.linspace(lo, hi, scan_points)
    evaluations = [(float(d), bool(predicate(float(d)))) for d in grid]
    if not evaluations[-1][1]:
        raise DegenerateBracket(f"property fails at the upper end delta={hi}")
    failing = [i for i, (_, ok) in enumerate(evaluations) if not ok]
    if not failing:
        return ThresholdResult(
            delta=float(lo), bracket=(lo, hi), at_floor=True, evaluations=evaluations
        )
    last = failing[-1]
    monotone = all(not ok for _, ok in evaluations[: last + 1])
    if not monotone:
        logger.warning("threshold property is not monotone on the scan of [%g, %g]", lo, hi)
    a, b = grid[last], grid[last + 1]
    while b - a > tol:
        mid = 0.5 * (a + b)
        ok = bool(predicate(float(mid)))
        evaluations.append((float(mid), ok))
        if ok:
            b = mid
        else:
            a = mid
    return ThresholdResult(
        delta=float(b), bracket=(lo, hi), monotone=monotone, evaluations=evaluations
    )


def r_family(kind, kappa=1.0):
    """``delta -> R`` of the coupled ensemble in the infinite-width limit."""

    def family(delta):
        return limit_r_transform(Spectrum.from_dict({"kind": kind, "delta": delta, "kappa": kappa}))

    return family


def _bracket(prior, bracket):
    if bracket is not None:
        return tuple(bracket)
    if prior.info_dimension >= 1.0:
        return DENSE_FLOOR, 1.0
    return prior.info_dimension, 1.0


def bp_threshold(prior, family, sigma2, bracket=None, tol=None, grid_n=None):
    """Infimum of ``delta`` above which the potential has a unique minimizer."""
    lo, hi = _bracket(prior, bracket)
    return bisect_threshold(
        lambda d: potential_curve(prior, family(d), sigma2, grid_n, delta=d).unique, lo, hi, tol
    )


def potential_threshold(prior, family, sigma2, bracket=None, tol=None, grid_n=None):
    """Infimum of ``delta`` above which the global minimizer is the smallest one."""
    lo, hi = _bracket(prior, bracket)
    return bisect_threshold(
        lambda d: potential_curve(prior, family(d), sigma2, grid_n, delta=d).optimal_is_smallest,
        lo,
        hi,
        tol,
    )


def saturates(prior, spectrum, sigma2, L, W, T=None):
    """
    Whether coupled Bayes SE reaches, on every section, the fixed point the
    uncoupled recursion reaches from the artificial start ``v = GOOD_INIT``.
    """
    good = run_se(
        CoupledModel(uniform_base(1, 0), spectrum, prior, sigma2), BAYES, T=T, init_v=GOOD_INIT
    )
    coupled = run_se(CoupledModel(uniform_base(L, W), spectrum, prior, sigma2), BAYES, T=T)
    if good.failed_at is not None or coupled.failed_at is not None:
        logger.warning(
            "state evolution failed at delta=%g: %s", spectrum.delta, good.error or coupled.error
        )
        return False
    return bool(np.all(coupled.final <= good.final[0] + SATURATION_TOL))


def coupled_threshold(
    prior, kind, sigma2, L, W, kappa=1.0, T=None, bracket=None, tol=None
):
    """
    Infimum of ``delta`` for which coupled Bayes SE converges to the good
    fixed point, together with the rate-loss adjusted ``(1 + W/L) delta``.
    """
    lo, hi = _bracket(prior, bracket)

    def predicate(delta):
        spectrum = Spectrum.from_dict({"kind": kind, "delta": delta, "kappa": kappa})
        try:
            return saturates(prior, spectrum, sigma2, L, W, T)
        except AmpLabError as exc:
            logger.warning("delta=%g rejected: %s", delta, exc)
            return False

    result = bisect_threshold(predicate, lo, hi, tol)
    result.rate_adjusted = (1.0 + W / L) * result.delta
    logger.info("coupled threshold L=%d W=%d: %.6f", L, W, result.delta)
    return result


@dataclass(frozen=True)
class OptimalityPoint:
    sigma2: float
    E_opt: float
    s_opt: float
    ties: int

    @property
    def scaled_sinr(self):
        return self.s_opt * self.sigma2


def optimality_gap(prior, R, sigma2_list, grid_n=None):
    """Global minimizer of the potential for each noise variance."""
    points = []
    for sigma2 in sorted(sigma2_list, reverse=True):
        curve = potential_curve(prior, R, sigma2, grid_n)
        points.append(
            OptimalityPoint(
                sigma2=sigma2, E_opt=curve.E_opt, s_opt=curve.s_opt, ties=len(curve.ties)
            )
        )
    return points
