"""
Long-memory OAMP: covariance messages over the whole history, a sufficient
statistic built from every preceding module-A message, and an Onsager
correction spread over the history.

With the LMMSE filter and the posterior-mean denoiser it reproduces OAMP,
which makes it a check on the memoryless algorithm rather than a solver.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from core.conf import amplab_setting
from core.exceptions import AmpLabError, DomainError, NotPosDef, SingularOnsager
from coupling.base import gamma_projector
from oamp.algorithm import (
    LMMSE,
    check_finite,
    denoise_sections,
    filter_gains,
    initial_state,
    run_oamp,
    section_module_a,
    section_mse,
)

logger = logging.getLogger(__name__)

PIVOT_RATIO = 1e-5
JITTER = 1e-12
PINV_CUTOFF = 1e-10
NEGATIVE_TOL = 1e-8
# residuals of V @ anchor at this level are rounding in 1 - V[i, t] / V[t, t]
ROUNDING_TOL = 64 * np.finfo(float).eps


class CovarianceSolver:
    """
    Computes ``V⁻¹ 1`` for the covariance messages of module A.

    The solve is anchored at ``e_t / V[t, t]``, the exact answer for the
    nested covariance structure reached near a fixed point, and any residual
    above ``structure_tol`` goes through the factorization.  Cholesky comes
    first, then a jittered Cholesky, then an eigenvalue pseudo-inverse.
    """

    def __init__(self, structure_tol=ROUNDING_TOL):
        self.structure_tol = structure_tol
        self.jitter_count = 0
        self.pinv_count = 0

    @property
    def warnings(self):
        return self.jitter_count + self.pinv_count

    def ones(self, V, ell=None):
        V = np.asarray(V, dtype=float)
        n = V.shape[0]
        if np.max(np.abs(V - V.T)) > 1e-12 * max(np.max(np.abs(V)), 1.0):
            raise NotPosDef(ell, f"covariance matrix of row section {ell} is not symmetric")
        eigenvalues = linalg.eigvalsh(V)
        if eigenvalues.max() <= 0 or eigenvalues.min() < -NEGATIVE_TOL * eigenvalues.max():
            raise NotPosDef(ell)
        anchor = np.zeros(n)
        anchor[-1] = 1.0 / V[-1, -1]
        residual = 1.0 - V @ anchor
        if n == 1 or np.max(np.abs(residual)) <= self.structure_tol:
            return anchor
        factor, well_conditioned = self._factor(V)
        if factor is None:
            jitter = JITTER * np.max(np.diag(V))
            factor, well_conditioned = self._factor(V + jitter * np.eye(n))
            if factor is not None and well_conditioned:
                self.jitter_count += 1
                logger.warning("row section %s: jitter %.3g added to the covariance", ell, jitter)
        if factor is not None and well_conditioned:
            return anchor + linalg.cho_solve(factor, residual)
        self.pinv_count += 1
        logger.warning("row section %s: covariance solved by pseudo-inverse", ell)
        return anchor + self._pseudo_inverse(V, residual, ell)

    @staticmethod
    def _factor(V):
        try:
            factor = linalg.cho_factor(V, lower=True)
        except linalg.LinAlgError:
            return None, False
        pivots = np.abs(np.diag(factor[0]))
        return factor, pivots.min() >= PIVOT_RATIO * pivots.max()

    @staticmethod
    def _pseudo_inverse(V, rhs, ell):
        eigenvalues, vectors = linalg.eigh(V)
        top = eigenvalues.max()
        if top <= 0 or eigenvalues.min() < -NEGATIVE_TOL * top:
            raise NotPosDef(ell)
        keep = eigenvalues > PINV_CUTOFF * top
        projected = vectors[:, keep].T @ rhs
        return vectors[:, keep] @ (projected / eigenvalues[keep])


@dataclass
class LmState:
    """History of LM-OAMP messages; per-``ell`` lists are indexed by row section."""

    x_BA: list
    V_BA: list
    gains: list = None
    eta_A: list = None
    X_AB: list = None
    V_AB: list = None
    eta_B: list = None
    weights: list = None
    eta_B_tau: list = None
    x_suf: np.ndarray = None
    v_suf: np.ndarray = None
    x_post: np.ndarray = None
    v_post: np.ndarray = None
    v_post_cov: np.ndarray = None
    iter: int = 0

    @property
    def t(self):
        """Index of the next module-A message."""
        return len(self.X_AB[0])


def initial_lm_state(system):
    base_state = initial_state(system)
    rows = system.base.rows
    return LmState(
        x_BA=base_state.x_BA,
        V_BA=[np.array([[v]]) for v in base_state.v_BA],
        gains=[[] for _ in range(rows)],
        eta_A=[[] for _ in range(rows)],
        X_AB=[[] for _ in range(rows)],
        V_AB=[np.zeros((0, 0)) for _ in range(rows)],
        eta_B=[[] for _ in range(rows)],
    )


def posterior_cross_covariance(operator, d_early, d_late, v_cross, sigma2):
    """
    ``σ² Tr(F_lateᵀ F_early)/Nc + v Tr((I - F_lateᵀA)(I - F_earlyᵀA)ᵀ)/Nc``
    evaluated on the singular directions.
    """
    s = operator.s
    nc = operator.Nc
    noise = sigma2 * float(np.sum(d_late * d_early)) / nc
    signal = nc - float(np.sum(d_late * s)) - float(np.sum(d_early * s))
    signal += float(np.sum(d_late * d_early * s * s))
    return noise + v_cross * signal / nc


def _grow(matrix, column):
    """Append a symmetric last row and column."""
    n = matrix.shape[0]
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = matrix
    out[:, n] = column
    out[n, :] = column
    return out


def lm_module_a_step(system, state):
    """Module A with covariance messages for all earlier iterations."""
    t = state.t
    for ell, section in enumerate(system.sections):
        V_BA = state.V_BA[ell]
        v = V_BA[t, t]
        operator = section.operator
        d = filter_gains(operator, v, system.sigma2, LMMSE)
        x_AB, v_AB, eta_A, _ = section_module_a(
            section, system.y[ell], state.x_BA[ell], v, system.sigma2, LMMSE
        )
        column = np.empty(t + 1)
        column[t] = v_AB
        for s in range(t):
            d_early = state.gains[ell][s]
            eta_early = state.eta_A[ell][s]
            v_post = posterior_cross_covariance(operator, d_early, d, V_BA[s, t], system.sigma2)
            column[s] = (v_post - eta_early * eta_A * V_BA[s, t]) / (
                section.width * (1.0 - eta_early) * (1.0 - eta_A)
            )
        state.gains[ell].append(d)
        state.eta_A[ell].append(eta_A)
        state.X_AB[ell].append(x_AB)
        state.V_AB[ell] = _grow(state.V_AB[ell], column)
    return state


def lm_sufficient_statistic(base, histories, V_AB, solver=None):
    """
    Sufficient statistic given every preceding message.

    ``1/v_suf[l] = Σ_w gamma² 1ᵀV⁻¹1`` and
    ``x_suf[l] = v_suf[l] Σ_w gamma X[l][w] V⁻¹1``.  Returns
    ``(x_suf, v_suf, weights, totals)`` with ``weights[ell] = V_AB[ell]⁻¹ 1``.
    """
    solver = solver or CovarianceSolver()
    weights = [solver.ones(V, ell) for ell, V in enumerate(V_AB)]
    totals = np.array([float(np.sum(c)) for c in weights])
    if np.any(~(totals > 0)):
        ell = int(np.argmin(totals))
        raise NotPosDef(ell)
    N = histories[0][0].size // base.width(0)
    precision = np.zeros(base.L)
    weighted = np.zeros((base.L, N))
    for ell in range(base.rows):
        combined = sum(c * x for c, x in zip(weights[ell], histories[ell]))
        for entry in gamma_projector(base, ell, N).entries:
            precision[entry.l] += entry.weight**2 * totals[ell]
            weighted[entry.l] += entry.weight * combined[entry.block]
    v_suf = 1.0 / precision
    return v_suf[:, None] * weighted, v_suf, weights, totals


def lm_module_b_step(system, state, prior, solver=None):
    """
    Denoise the long-memory statistic and return to the extended spaces.

    The conditional error covariance of the posterior mean given two nested
    statistics equals the posterior variance of the newer one, so every
    entry of the new posterior covariance row is ``v_post``.
    """
    base = system.base
    t = state.t - 1
    x_suf, v_suf, weights, totals = lm_sufficient_statistic(base, state.X_AB, state.V_AB, solver)
    x_post, v_post, mean_derivative = denoise_sections(prior, x_suf, v_suf)
    flat_post = x_post.reshape(-1)
    guard = amplab_setting("GUARD")
    x_BA, V_BA, eta_tau_all = [], [], []
    for ell in range(base.rows):
        projector = gamma_projector(base, ell, system.N)
        width = projector.width
        total = totals[ell]
        eta_w = [
            width * e.weight**2 * total * v_suf[e.l] * mean_derivative[e.l]
            for e in projector.entries
        ]
        eta_B = sum(eta_w) / width
        eta_tau = eta_B * weights[ell] / total
        denom = 1.0 - eta_B / width
        if abs(denom) < guard:
            raise SingularOnsager(f"row section {ell}: 1 - eta_B/|W| = {denom:.3g}")
        lifted = math.sqrt(width) * projector.apply(flat_post)
        memory = sum(e * x for e, x in zip(eta_tau, state.X_AB[ell]))
        x_BA.append((lifted - memory / math.sqrt(width)) / denom)
        state.eta_B[ell].append(eta_B)
        weighted_post = sum(e.weight**2 * v_post[e.l] for e in projector.entries)
        column = np.empty(t + 2)
        column[0] = weighted_post / denom
        for s in range(t + 1):
            eta_early = state.eta_B[ell][s]
            column[s + 1] = (weighted_post - eta_early * eta_B / (width * total)) / (
                (1.0 - eta_early / width) * denom
            )
        previous = state.V_BA[ell]
        grown = np.empty((t + 2, t + 2))
        grown[: t + 1, : t + 1] = previous
        grown[:, t + 1] = column
        grown[t + 1, :] = column
        V_BA.append(grown)
        eta_tau_all.append(eta_tau)
    state.x_BA = x_BA
    state.V_BA = V_BA
    state.weights = weights
    state.eta_B_tau = eta_tau_all
    state.x_suf = x_suf
    state.v_suf = v_suf
    state.x_post = flat_post
    state.v_post = v_post
    state.v_post_cov = np.repeat(v_post[:, None], t + 2, axis=1)
    state.iter = t + 1
    return state


@dataclass
class EquivalenceReport:
    max_mean_dev: float = 0.0
    max_var_dev: float = 0.0
    max_offdiag_dev: float = 0.0
    max_mse_dev: float = 0.0
    posdef_ok: bool = True
    solver_warnings: int = 0
    compared_iterations: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class LmResult:
    mse: np.ndarray
    v_post: np.ndarray
    state: LmState
    report: EquivalenceReport
    failed_at: int = None
    error: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def largest_mse(self):
        return self.mse.max(axis=1) if self.mse.size else np.empty(0)


def _lm_snapshot(state):
    t = state.t - 1
    return {
        "x_AB": [h[t].copy() for h in state.X_AB],
        "v_AB": np.array([V[t, t] for V in state.V_AB]),
        "V_AB_row": [V[:, t].copy() for V in state.V_AB],
        "x_BA": [x.copy() for x in state.x_BA],
        "v_BA": np.array([V[t + 1, t + 1] for V in state.V_BA]),
    }


def _relative(a, b):
    scale = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / scale) if scale > 0 else float(np.linalg.norm(a))


def compare_histories(lm_history, oamp_history):
    """Largest deviations between matching LM-OAMP and OAMP messages."""
    report = EquivalenceReport()
    for lm, om in zip(lm_history, oamp_history):
        for key in ("x_AB", "x_BA"):
            for a, b in zip(lm[key], om[key]):
                report.max_mean_dev = max(report.max_mean_dev, _relative(a, b))
        for key in ("v_AB", "v_BA"):
            report.max_var_dev = max(
                report.max_var_dev, float(np.max(np.abs(lm[key] - om[key])))
            )
        for row, diag in zip(lm["V_AB_row"], lm["v_AB"]):
            report.max_offdiag_dev = max(
                report.max_offdiag_dev, float(np.max(np.abs(row - diag)) / diag)
            )
        report.compared_iterations += 1
    return report


def run_lmoamp(system, prior, T=10, compare=True):
    """
    Run ``T`` LM-OAMP iterations and, with ``compare``, OAMP on the same
    system, reporting how far the two message sequences drift apart.
    """
    if T < 1:
        raise DomainError("T must be at least 1")
    cap = amplab_setting("LM_MAX_HISTORY")
    if T > cap:
        raise DomainError(f"LM-OAMP keeps at most {cap} iterations of history, got T={T}")
    solver = CovarianceSolver()
    state = initial_lm_state(system)
    mse, v_post, history = [], [], []
    failed_at, error, posdef_ok = None, "", True
    for t in range(T):
        try:
            lm_module_a_step(system, state)
            lm_module_b_step(system, state, prior, solver)
            check_finite(_FiniteView(state), t)
        except NotPosDef as exc:
            failed_at, error, posdef_ok = t, str(exc), False
            logger.warning("LM-OAMP stopped at iteration %d: %s", t, exc)
            break
        except AmpLabError as exc:
            failed_at, error = t, str(exc)
            logger.warning("LM-OAMP stopped at iteration %d: %s", t, exc)
            break
        mse.append(section_mse(system, state.x_post))
        v_post.append(state.v_post.copy())
        history.append(_lm_snapshot(state))
    report = EquivalenceReport(posdef_ok=posdef_ok)
    if compare:
        reference = run_oamp(system, prior, LMMSE, T=T, record=True)
        report = compare_histories(history, reference.history)
        report.posdef_ok = posdef_ok
        steps = min(len(mse), reference.mse.shape[0])
        if steps:
            lm_mse = np.array(mse[:steps])
            report.max_mse_dev = float(
                np.max(np.abs(lm_mse - reference.mse[:steps]) / reference.mse[:steps])
            )
    report.solver_warnings = solver.warnings
    logger.info(
        "LM-OAMP finished %d iterations, mean deviation %.3g", len(mse), report.max_mean_dev
    )
    return LmResult(
        mse=np.array(mse).reshape(len(mse), system.L),
        v_post=np.array(v_post).reshape(len(v_post), system.L),
        state=state,
        report=report,
        failed_at=failed_at,
        error=error,
        history=history,
    )


@dataclass
class _FiniteView:
    """Adapter exposing the current LM messages to the NaN guard of OAMP."""

    state: LmState

    @property
    def v_AB(self):
        return np.array([V[-1, -1] for V in self.state.V_AB])

    @property
    def v_BA(self):
        return np.array([V[-1, -1] for V in self.state.V_BA])

    @property
    def v_post(self):
        return self.state.v_post

    @property
    def x_post(self):
        return self.state.x_post
