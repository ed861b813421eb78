"""
State evolution of OAMP and LM-OAMP on spatially coupled systems, the
change of variables to ``(E, s)`` and the approximate recursions driven by a
single R-transform.

Every recursion is deterministic; trace functionals of the linear filter
come from the eigenvalue law of ``G[ell] = |W[ell]| A[ell]ᵀA[ell]``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from core.conf import amplab_setting
from core.exceptions import (
    AmpLabError,
    DomainError,
    NumericalError,
    SingularOnsager,
)
from coupling.base import initial_variance
from denoiser.bayes import error_covariance, mmse
from lmoamp.algorithm import CovarianceSolver
from oamp.algorithm import FILTERS, LMMSE, MF, ZF
from spectra.transforms import (
    inverse_moment,
    moments,
    one_minus_eta,
    r_transform,
    spectral_mean,
)

logger = logging.getLogger(__name__)

OAMP = "oamp"
BAYES = "bayes"
LM = "lm"
APPROX = "approx"

KINDS = (OAMP, BAYES, LM, APPROX)

ETA_A_GUARD = 1e-15
IDENTITY_TOL = 1e-6
# relative accuracy of the spectral quadrature behind the LM covariance entries
LM_STRUCTURE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CoupledModel:
    """Asymptotic description of a coupled system: base matrix, law and prior."""

    base: object
    spectrum: object
    prior: object
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise DomainError("noise variance must be positive")

    @property
    def widths(self):
        return self.base.widths()

    @property
    def weights(self):
        """``gamma²`` as a ``(L+W) x L`` array."""
        return self.base.gamma**2

    def section_spectrum(self, ell):
        return self.spectrum.section(self.base.width(ell))

    @property
    def section_spectra(self):
        return [self.section_spectrum(ell) for ell in range(self.base.rows)]

    def initial_v(self, init_v=None):
        if init_v is not None:
            return np.full(self.base.rows, float(init_v))
        return np.array([initial_variance(self.base, ell, 1) for ell in range(self.base.rows)])


@dataclass
class SeState:
    """
    ``v_BA`` enters the next module-A step; the remaining fields describe the
    step that produced it.
    """

    v_BA: np.ndarray
    v_BA_prev: np.ndarray = None
    v_AB: np.ndarray = None
    v_suf: np.ndarray = None
    v_post: np.ndarray = None
    eta_A: np.ndarray = None
    eta_B: np.ndarray = None
    eta_B_prev: np.ndarray = None
    iter: int = 0


@dataclass
class EsState:
    """``E_{t+1}[ell]``, ``s_t[l]`` and the diagnostics of the change of variables."""

    E: np.ndarray
    s: np.ndarray
    E_current: np.ndarray
    g: np.ndarray
    nu: np.ndarray
    identity_residual: float


def bayes_moments(prior):
    """``(mse, E[f'])`` of the posterior-mean denoiser at noise variances ``v``."""

    def evaluate(v):
        mse = np.asarray(mmse(prior, 1.0 / np.asarray(v, dtype=float)))
        return mse, mse / v

    return evaluate


def _check_positive(name, values, iteration):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericalError(name, iteration)
    if np.any(values <= 0):
        raise NumericalError(name, iteration, "nonpositive value in")


def _module_a_lmmse(model, v_BA):
    gaps = np.empty(model.base.rows)
    for ell, spec in enumerate(model.section_spectra):
        z = v_BA[ell] / (model.widths[ell] * model.sigma2)
        gaps[ell] = float(one_minus_eta(spec, z))
    if np.any(gaps < ETA_A_GUARD):
        ell = int(np.argmin(gaps))
        raise DomainError(f"row section {ell}: eta_A reached 1 (1 - eta_A = {gaps[ell]:.3g})")
    return 1.0 - gaps, gaps


def _module_a_general(model, v_BA, kind):
    """``(eta_A, v_post_A)`` from trace functionals of the filter."""
    widths = model.widths
    eta_A = np.empty(model.base.rows)
    v_post = np.empty(model.base.rows)
    for ell, spec in enumerate(model.section_spectra):
        width, v = widths[ell], v_BA[ell]
        if kind == LMMSE:
            gap = float(one_minus_eta(spec, v / (width * model.sigma2)))
            eta_A[ell] = 1.0 - gap
            v_post[ell] = eta_A[ell] * v
        elif kind == MF:
            mu2 = moments(spec, 2)[1]
            eta_A[ell] = 1.0 - 1.0 / width
            v_post[ell] = model.sigma2 / width + v * (1.0 - 2.0 / width + mu2 / width**2)
        elif kind == ZF:
            rank = min(spec.delta, 1.0)
            eta_A[ell] = 1.0 - rank
            v_post[ell] = model.sigma2 * width * inverse_moment(spec) + v * (1.0 - rank)
        else:
            raise DomainError(f"unknown linear filter {kind!r}")
    return eta_A, v_post


def se_step_bayes(model, state):
    """One iteration of Bayes-optimal OAMP state evolution with the LMMSE filter."""
    widths = model.widths
    v_BA = state.v_BA
    eta_A, gaps = _module_a_lmmse(model, v_BA)
    v_AB = eta_A * v_BA / (widths * gaps)
    v_suf = 1.0 / (model.weights.T @ (1.0 / v_AB))
    v_post = np.asarray(mmse(model.prior, 1.0 / v_suf))
    eta_B = (model.weights @ v_post) / v_AB
    denom = 1.0 - eta_B / widths
    if np.any(np.abs(denom) < amplab_setting("GUARD")):
        raise SingularOnsager("1 - eta_B/|W| vanished in state evolution")
    new_v_BA = eta_B * v_AB / denom
    _check_positive("v_BA", new_v_BA, state.iter)
    return SeState(
        v_BA=new_v_BA,
        v_BA_prev=v_BA,
        v_AB=v_AB,
        v_suf=v_suf,
        v_post=v_post,
        eta_A=eta_A,
        eta_B=eta_B,
        eta_B_prev=state.eta_B,
        iter=state.iter + 1,
    )


def se_step_general(model, state, kind=LMMSE, denoiser_moments=None):
    """
    One iteration of OAMP state evolution for the LMMSE, matched or
    zero-forcing filter and a denoiser given through ``denoiser_moments``
    (default: the posterior mean of the model prior).
    """
    if kind not in FILTERS:
        raise DomainError(f"unknown linear filter {kind!r}")
    denoiser_moments = denoiser_moments or bayes_moments(model.prior)
    widths = model.widths
    v_BA = state.v_BA
    eta_A, v_post_A = _module_a_general(model, v_BA, kind)
    gaps = 1.0 - eta_A
    if np.any(gaps < ETA_A_GUARD):
        raise DomainError("eta_A reached 1 in state evolution")
    v_AB = (v_post_A - eta_A**2 * v_BA) / (widths * gaps**2)
    _check_positive("v_AB", v_AB, state.iter)
    v_suf = 1.0 / (model.weights.T @ (1.0 / v_AB))
    v_post, mean_derivative = denoiser_moments(v_suf)
    eta_B = (model.weights @ (v_suf * mean_derivative)) / v_AB
    denom = 1.0 - eta_B / widths
    if np.any(np.abs(denom) < amplab_setting("GUARD")):
        raise SingularOnsager("1 - eta_B/|W| vanished in state evolution")
    new_v_BA = ((model.weights @ v_post) - eta_B**2 * v_AB / widths) / denom**2
    _check_positive("v_BA", new_v_BA, state.iter)
    return SeState(
        v_BA=new_v_BA,
        v_BA_prev=v_BA,
        v_AB=v_AB,
        v_suf=v_suf,
        v_post=np.asarray(v_post),
        eta_A=eta_A,
        eta_B=eta_B,
        eta_B_prev=state.eta_B,
        iter=state.iter + 1,
    )


def se_to_es(state, model):
    """
    Change of variables ``s_t = 1/v_suf``, ``E_{t+1} = Σ gamma² v_post``.

    Also checks ``1/v_AB = g[ell](eta_A v_BA)`` with
    ``g[ell](z) = R_G(-z/(|W| σ²))/σ²``.
    """
    widths = model.widths
    sigma2 = model.sigma2
    g = np.array(
        [
            r_transform(spec, -state.eta_A[ell] * state.v_BA_prev[ell] / (widths[ell] * sigma2))
            / sigma2
            for ell, spec in enumerate(model.section_spectra)
        ]
    )
    s = 1.0 / state.v_suf
    residual = max(
        float(np.max(np.abs(g * state.v_AB - 1.0))),
        float(np.max(np.abs((model.weights.T @ g) / s - 1.0))),
    )
    if residual > IDENTITY_TOL:
        raise NumericalError(
            f"R-transform identity (residual {residual:.3g})", state.iter, "violated"
        )
    eta_B_prev = np.zeros(model.base.rows) if state.eta_B_prev is None else state.eta_B_prev
    nu = state.eta_A / (1.0 - eta_B_prev / widths)
    return EsState(
        E=model.weights @ state.v_post,
        s=s,
        E_current=state.eta_A * state.v_BA_prev / nu,
        g=g,
        nu=nu,
        identity_residual=residual,
    )


def se_step_approx(s_tilde, prior, R, sigma2, base):
    """
    ``E[ell] = Σ_w gamma² MMSE(s[ell-w])`` followed by
    ``s[l] = Σ_w gamma² g(E[l+w])`` with ``g(z) = R(-z/σ²)/σ²``.
    Returns the new ``(E_tilde, s_tilde)``.
    """
    weights = base.gamma**2
    E = weights @ np.asarray(mmse(prior, np.asarray(s_tilde, dtype=float)))
    g = np.asarray(R(-E / sigma2), dtype=float) / sigma2
    return E, weights.T @ g


@dataclass
class LmSeState:
    """Covariance recursions; matrices are indexed by iteration."""

    V_BA: list
    V_AB: list = None
    eta_A: list = None
    eta_B: list = None
    v_suf: list = None
    V_post: list = None
    weights: list = None
    iter: int = 0

    @property
    def t(self):
        return self.V_AB[0].shape[0]

    @property
    def diagonal_v_post(self):
        return np.array([V[-1, -1] for V in self.V_post])


def initial_lm_se_state(model, init_v=None):
    rows, L = model.base.rows, model.base.L
    return LmSeState(
        V_BA=[np.array([[v]]) for v in model.initial_v(init_v)],
        V_AB=[np.zeros((0, 0)) for _ in range(rows)],
        eta_A=[[] for _ in range(rows)],
        eta_B=[[] for _ in range(rows)],
        v_suf=[[] for _ in range(L)],
        V_post=[np.array([[1.0]]) for _ in range(L)],
        weights=[[] for _ in range(rows)],
    )


def lmmse_cross_traces(spec, width, a, b, sigma2):
    """
    ``E[a b λ/((σ²+aλ)(σ²+bλ))]`` and ``E[σ⁴/((σ²+aλ)(σ²+bλ))]`` over the
    eigenvalues ``λ`` of ``AᵀA`` for two LMMSE filters with variances ``a, b``.
    """

    def denominator(lam):
        lam = lam / width
        return (sigma2 + a * lam) * (sigma2 + b * lam)

    noise = spectral_mean(spec, lambda lam: a * b * (lam / width) / denominator(lam))
    signal = spectral_mean(spec, lambda lam: sigma2**2 / denominator(lam))
    return noise, signal


def _grow(matrix, column):
    n = matrix.shape[0]
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = matrix
    out[:, n] = column
    out[n, :] = column
    return out


def se_step_lm(model, state, solver=None, exact_nested=True):
    """
    One iteration of the LM-OAMP covariance recursions (LMMSE filter, Bayes
    denoiser).

    The noise covariance between the sufficient statistics of two iterations
    is computed from the solved combination weights and, within the quadrature
    accuracy, snapped to the nested value.  ``exact_nested=False`` keeps the
    computed value and sends every posterior covariance through the bivariate
    quadrature.
    """
    solver = solver or CovarianceSolver(LM_STRUCTURE_TOL)
    widths = model.widths
    sigma2 = model.sigma2
    t = state.t
    rows, L = model.base.rows, model.base.L
    v_diag = np.array([V[t, t] for V in state.V_BA])
    eta_now, gaps = _module_a_lmmse(model, v_diag)
    for ell, spec in enumerate(model.section_spectra):
        V_BA = state.V_BA[ell]
        width = widths[ell]
        eta_t = eta_now[ell]
        column = np.empty(t + 1)
        column[t] = eta_t * V_BA[t, t] / (width * gaps[ell])
        for s in range(t):
            eta_s = state.eta_A[ell][s]
            noise, signal = lmmse_cross_traces(spec, width, V_BA[s, s], V_BA[t, t], sigma2)
            v_post = sigma2 * noise + V_BA[s, t] * signal
            column[s] = (v_post - eta_s * eta_t * V_BA[s, t]) / (
                width * (1.0 - eta_s) * (1.0 - eta_t)
            )
        state.eta_A[ell].append(eta_t)
        state.V_AB[ell] = _grow(state.V_AB[ell], column)
    weights = [solver.ones(V, ell) for ell, V in enumerate(state.V_AB)]
    totals = np.array([float(np.sum(c)) for c in weights])
    v_suf = 1.0 / (model.weights.T @ totals)
    for ell, w in enumerate(weights):
        state.weights[ell].append(w)
    # cross[ell, s]: covariance of the weighted module-A noise at iterations s and t
    cross = np.array(
        [
            [state.weights[ell][s] @ V[: s + 1, :] @ weights[ell] for s in range(t + 1)]
            for ell, V in enumerate(state.V_AB)
        ]
    )
    suf_cov = model.weights.T @ cross
    for l in range(L):
        state.v_suf[l].append(v_suf[l])
    v_post_diag = np.asarray(mmse(model.prior, 1.0 / v_suf))
    for l in range(L):
        column = np.empty(t + 2)
        column[0] = v_post_diag[l]
        for s in range(t + 1):
            v_early = state.v_suf[l][s]
            cov = v_early * v_suf[l] * suf_cov[l, s]
            if exact_nested and abs(cov - v_suf[l]) <= LM_STRUCTURE_TOL * v_suf[l]:
                cov = v_suf[l]
            column[s + 1] = error_covariance(
                model.prior, v_early, v_suf[l], cov, exact_nested=exact_nested
            )
        state.V_post[l] = _grow(state.V_post[l], column)
    post = np.array([V[:, -1] for V in state.V_post])
    guard = amplab_setting("GUARD")
    for ell in range(rows):
        width = widths[ell]
        eta_B = float(model.weights[ell] @ post[:, -1]) * totals[ell]
        denom = 1.0 - eta_B / width
        if abs(denom) < guard:
            raise SingularOnsager(f"row section {ell}: 1 - eta_B/|W| vanished")
        state.eta_B[ell].append(eta_B)
        column = np.empty(t + 2)
        column[0] = float(model.weights[ell] @ post[:, 0]) / denom
        for s in range(t + 1):
            eta_s = state.eta_B[ell][s]
            weighted = float(model.weights[ell] @ post[:, s + 1])
            column[s + 1] = (weighted - eta_s * eta_B / (width * totals[ell])) / (
                (1.0 - eta_s / width) * denom
            )
        state.V_BA[ell] = _grow(state.V_BA[ell], column)
    state.iter += 1
    _check_positive("v_BA", [V[-1, -1] for V in state.V_BA], state.iter)
    return state


@dataclass
class SeResult:
    kind: str
    v_post: np.ndarray
    v_BA: np.ndarray
    converged: bool
    state: object = None
    failed_at: int = None
    error: str = ""
    es_history: list = field(default_factory=list, repr=False)

    @property
    def iterations(self):
        return self.v_post.shape[0]

    @property
    def final(self):
        return self.v_post[-1]

    @property
    def average_mse(self):
        return float(np.mean(self.final))

    @property
    def largest_mse(self):
        return float(np.max(self.final))

    def fixed_point(self):
        return {
            "kind": self.kind,
            "iterations": self.iterations,
            "converged": self.converged,
            "average_mse": self.average_mse,
            "largest_mse": self.largest_mse,
            "failed_at": self.failed_at,
        }


def approx_initial_s(model, init_v=None):
    """``s_0 = 1/v_suf_0`` from the first module-A step of the exact recursion."""
    v_BA = model.initial_v(init_v)
    eta_A, gaps = _module_a_lmmse(model, v_BA)
    v_AB = eta_A * v_BA / (model.widths * gaps)
    return model.weights.T @ (1.0 / v_AB)


def run_se(
    model,
    kind=BAYES,
    T=None,
    tol=None,
    init_v=None,
    filter_kind=LMMSE,
    R=None,
    es=False,
    exact_nested=True,
):
    """
    Iterate a state-evolution recursion until the largest change of the
    per-section MSE drops below ``tol`` or ``T`` iterations have run.

    ``kind`` selects the recursion: ``oamp`` (any filter), ``bayes``, ``lm``
    (covariance recursions, diagonal reported) or ``approx`` (needs ``R``).
    Running out of iterations sets ``converged=False`` instead of raising.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown state evolution kind {kind!r}")
    T = amplab_setting("SE_MAX_ITER") if T is None else T
    tol = amplab_setting("SE_TOL") if tol is None else tol
    if T < 1:
        raise DomainError("T must be at least 1")
    if kind == APPROX and R is None:
        raise DomainError("the approximate recursion needs an R-transform")
    solver = CovarianceSolver(LM_STRUCTURE_TOL)
    L = model.base.L
    trajectory, messages, es_history = [], [], []
    failed_at, error, converged = None, "", False
    if kind == LM:
        state = initial_lm_se_state(model, init_v)
    elif kind == APPROX:
        state = approx_initial_s(model, init_v)
    else:
        state = SeState(v_BA=model.initial_v(init_v))
    previous = None
    for t in range(T):
        try:
            if kind == BAYES:
                state = se_step_bayes(model, state)
                current, message = state.v_post, state.v_BA
                if es:
                    es_history.append(se_to_es(state, model))
            elif kind == OAMP:
                state = se_step_general(model, state, filter_kind)
                current, message = state.v_post, state.v_BA
            elif kind == LM:
                state = se_step_lm(model, state, solver, exact_nested)
                current = state.diagonal_v_post
                message = np.array([V[-1, -1] for V in state.V_BA])
            else:
                current = np.asarray(mmse(model.prior, state))
                message, state = se_step_approx(state, model.prior, R, model.sigma2, model.base)
        except AmpLabError as exc:
            failed_at, error = t, str(exc)
            logger.warning("%s state evolution stopped at iteration %d: %s", kind, t, exc)
            break
        trajectory.append(np.array(current, dtype=float))
        messages.append(np.array(message, dtype=float))
        if previous is not None and np.max(np.abs(current - previous)) < tol:
            converged = True
            break
        previous = trajectory[-1]
    logger.debug("%s state evolution: %d iterations", kind, len(trajectory))
    rows = messages[0].size if messages else 0
    return SeResult(
        kind=kind,
        v_post=np.array(trajectory).reshape(len(trajectory), L),
        v_BA=np.array(messages).reshape(len(messages), rows),
        converged=converged,
        state=state,
        failed_at=failed_at,
        error=error,
        es_history=es_history,
    )
