"""
Orthogonal AMP on a spatially coupled system.

Module A runs a linear filter in every extended space ``R^Nc[ell]``; module B
combines the extracted messages into a sufficient statistic per column
section, denoises it and maps the result back to the extended spaces.  Both
modules hand over Onsager-corrected (extrinsic) messages.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from core.conf import amplab_setting
from core.exceptions import (
    AmpLabError,
    DomainError,
    NumericalError,
    SingularFilter,
    SingularOnsager,
)
from coupling.base import gamma_projector, initial_variance
from denoiser.bayes import denoise, denoise_derivative, posterior_variance

logger = logging.getLogger(__name__)

LMMSE = "lmmse"
MF = "mf"
ZF = "zf"

FILTERS = (LMMSE, MF, ZF)


@dataclass
class OampState:
    """Messages of one OAMP iteration.  Per-``ell`` lists are indexed by row section."""

    x_BA: list
    v_BA: np.ndarray
    x_AB: list = None
    v_AB: np.ndarray = None
    eta_A: np.ndarray = None
    v_post_A: np.ndarray = None
    x_suf: np.ndarray = None
    v_suf: np.ndarray = None
    x_post: np.ndarray = None
    v_post: np.ndarray = None
    mean_derivative: np.ndarray = None
    eta_B: np.ndarray = None
    iter: int = 0


@dataclass
class OampResult:
    mse: np.ndarray
    v_post: np.ndarray
    v_BA: np.ndarray
    state: OampState
    failed_at: int = None
    error: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def iterations(self):
        return self.mse.shape[0]

    @property
    def largest_mse(self):
        """Largest-section MSE per iteration."""
        return self.mse.max(axis=1) if self.mse.size else np.empty(0)

    @property
    def final_mse(self):
        return self.mse[-1] if self.mse.size else np.empty(0)


def initial_state(system):
    """``x_BA = 0`` and ``v_BA`` from the coupling weights."""
    v_BA = np.array(
        [initial_variance(system.base, ell, system.N) for ell in range(system.base.rows)]
    )
    x_BA = [np.zeros(section.Nc) for section in system.sections]
    return OampState(x_BA=x_BA, v_BA=v_BA)


def filter_gains(operator, v, sigma2, kind):
    """Per singular direction gains ``d`` with ``Fᵀ = V diag(d) Uᵀ``."""
    s = operator.s
    if kind == LMMSE:
        return v * s / (sigma2 + v * s * s)
    if kind == MF:
        return s.copy()
    if kind == ZF:
        safe = np.where(s > 0, s, 1.0)
        return np.where(s > 0, 1.0 / safe, 0.0)
    raise DomainError(f"unknown linear filter {kind!r}")


def filter_traces(operator, d):
    """``(Tr(FᵀF), Tr(FᵀA))`` and ``Tr((I - FᵀA)(I - FᵀA)ᵀ)`` from the gains."""
    s = operator.s
    ds = float(np.sum(d * s))
    return float(np.sum(d * d)), ds, operator.Nc - 2.0 * ds + float(np.sum((d * s) ** 2))


def section_module_a(section, y, x_BA, v_BA, sigma2, kind=LMMSE):
    """
    Module A on one row section.

    Returns ``(x_AB, v_AB, eta_A, v_post)``; ``x_AB`` estimates
    ``|W|^(-1/2) x_vec``.
    """
    if not v_BA > 0:
        raise DomainError(f"row section {section.ell}: v_BA must be positive")
    operator = section.operator
    d = filter_gains(operator, v_BA, sigma2, kind)
    trace_ff, trace_fa, trace_res = filter_traces(operator, d)
    nc = operator.Nc
    eta_A = 1.0 - trace_fa / nc
    if kind == LMMSE:
        v_post = eta_A * v_BA
    else:
        v_post = sigma2 * trace_ff / nc + v_BA * trace_res / nc
    gap = 1.0 - eta_A
    if gap < amplab_setting("GUARD"):
        raise SingularFilter(f"row section {section.ell}: 1 - eta_A = {gap:.3g}")
    residual = y - operator.matvec(x_BA)
    x_post = x_BA + operator.lift(d * operator.left_adjoint(residual))
    scale = 1.0 / math.sqrt(section.width)
    x_AB = scale * (x_post - eta_A * x_BA) / gap
    v_AB = (v_post - eta_A**2 * v_BA) / (section.width * gap**2)
    return x_AB, v_AB, eta_A, v_post


def module_a_step(system, state, kind=LMMSE):
    """Run module A on every row section."""
    outputs = [
        section_module_a(section, system.y[ell], state.x_BA[ell], state.v_BA[ell], system.sigma2, kind)
        for ell, section in enumerate(system.sections)
    ]
    x_AB, v_AB, eta_A, v_post = zip(*outputs)
    return replace(
        state,
        x_AB=list(x_AB),
        v_AB=np.array(v_AB),
        eta_A=np.array(eta_A),
        v_post_A=np.array(v_post),
    )


def _section_size(base, x_AB):
    return x_AB[0].size // base.width(0)


def sufficient_statistic(base, x_AB, v_AB):
    """
    Combine the ``W+1`` extracted messages of every column section.

    ``v_suf[l] = (Σ_w gamma²[l+w][l] / v_AB[l+w])⁻¹`` and
    ``x_suf[l] = v_suf[l] Σ_w gamma[l+w][l] x_AB[l+w][w] / v_AB[l+w]``.
    """
    v_AB = np.asarray(v_AB, dtype=float)
    if np.any(~(v_AB > 0)):
        raise DomainError("extrinsic variances must be positive")
    N = _section_size(base, x_AB)
    precision = np.zeros(base.L)
    weighted = np.zeros((base.L, N))
    for ell in range(base.rows):
        projector = gamma_projector(base, ell, N)
        for entry in projector.entries:
            precision[entry.l] += entry.weight**2 / v_AB[ell]
            weighted[entry.l] += entry.weight * x_AB[ell][entry.block] / v_AB[ell]
    v_suf = 1.0 / precision
    return v_suf[:, None] * weighted, v_suf


def denoise_sections(prior, x_suf, v_suf):
    """Posterior means, averaged posterior variances and derivatives per column section."""
    x_post = np.empty_like(x_suf)
    v_post = np.empty(x_suf.shape[0])
    mean_derivative = np.empty(x_suf.shape[0])
    for l, (u, v) in enumerate(zip(x_suf, v_suf)):
        x_post[l] = denoise(prior, u, v)
        v_post[l] = np.mean(posterior_variance(prior, u, v))
        mean_derivative[l] = np.mean(denoise_derivative(prior, u, v))
    return x_post, v_post, mean_derivative


def section_module_b(base, ell, N, x_post, v_post, v_suf, mean_derivative, x_AB, v_AB, bayes=True):
    """
    Onsager correction in the extended space of row section ``ell``.

    Returns ``(x_BA, v_BA, eta_B)``.
    """
    projector = gamma_projector(base, ell, N)
    width = projector.width
    eta_w = [
        width * e.weight**2 * v_suf[e.l] * mean_derivative[e.l] / v_AB
        for e in projector.entries
    ]
    eta_B = sum(eta_w) / width
    denom = 1.0 - eta_B / width
    if abs(denom) < amplab_setting("GUARD"):
        raise SingularOnsager(f"row section {ell}: 1 - eta_B/|W| = {denom:.3g}")
    lifted = math.sqrt(width) * projector.apply(x_post)
    x_BA = (lifted - eta_B * x_AB / math.sqrt(width)) / denom
    weighted_post = sum(e.weight**2 * v_post[e.l] for e in projector.entries)
    if bayes:
        eta_opt = weighted_post / v_AB
        denom_opt = 1.0 - eta_opt / width
        if abs(denom_opt) < amplab_setting("GUARD"):
            raise SingularOnsager(f"row section {ell}: 1 - eta_B/|W| = {denom_opt:.3g}")
        v_BA = eta_opt * v_AB / denom_opt
    else:
        v_BA = (weighted_post - eta_B**2 * v_AB / width) / denom**2
    return x_BA, v_BA, eta_B


def module_b_step(system, state, prior, bayes=True):
    """
    Sufficient statistic, denoising and the Onsager correction of the
    posterior mean.  ``bayes`` selects the shortcut for the extrinsic
    variance that holds for the posterior-mean denoiser.
    """
    base = system.base
    x_suf, v_suf = sufficient_statistic(base, state.x_AB, state.v_AB)
    x_post, v_post, mean_derivative = denoise_sections(prior, x_suf, v_suf)
    flat_post = x_post.reshape(-1)
    outputs = [
        section_module_b(
            base,
            ell,
            system.N,
            flat_post,
            v_post,
            v_suf,
            mean_derivative,
            state.x_AB[ell],
            state.v_AB[ell],
            bayes=bayes,
        )
        for ell in range(base.rows)
    ]
    x_BA, v_BA, eta_B = zip(*outputs)
    return replace(
        state,
        x_suf=x_suf,
        v_suf=v_suf,
        x_post=flat_post,
        v_post=v_post,
        mean_derivative=mean_derivative,
        x_BA=list(x_BA),
        v_BA=np.array(v_BA),
        eta_B=np.array(eta_B),
    )


def damp(new, old, zeta):
    """``zeta * new + (1 - zeta) * old`` for messages of module B."""
    if zeta == 1.0:
        return new
    x_BA = [zeta * a + (1.0 - zeta) * b for a, b in zip(new.x_BA, old.x_BA)]
    v_BA = zeta * new.v_BA + (1.0 - zeta) * old.v_BA
    return replace(new, x_BA=x_BA, v_BA=v_BA)


def section_mse(system, x_post):
    return np.mean((system.x - x_post).reshape(system.L, system.N) ** 2, axis=1)


def check_finite(state, iteration):
    for name in ("v_AB", "v_BA", "v_post"):
        values = getattr(state, name)
        if values is not None and not np.all(np.isfinite(values)):
            raise NumericalError(name, iteration)
    if not np.all(np.isfinite(state.x_post)):
        raise NumericalError("x_post", iteration)
    if np.any(state.v_BA <= 0) or np.any(state.v_AB <= 0):
        raise NumericalError("v_AB or v_BA", iteration, "nonpositive value in")


def snapshot(state):
    """Copy of the messages compared between OAMP and its long-memory variant."""
    return {
        "x_AB": [a.copy() for a in state.x_AB],
        "v_AB": state.v_AB.copy(),
        "x_BA": [a.copy() for a in state.x_BA],
        "v_BA": state.v_BA.copy(),
        "v_post": state.v_post.copy(),
    }


def run_oamp(system, prior, kind=LMMSE, T=100, zeta=1.0, tol=None, bayes=True, record=False):
    """
    Run ``T`` OAMP iterations from the standard initial condition.

    Damping replaces the output of module B by ``zeta * new + (1 - zeta) * old``
    from the second iteration on.  With ``tol`` set, iteration stops once
    every ``|Δv_BA|`` falls below it.  Failures stop the run and are reported
    through ``failed_at``.
    """
    if T < 1:
        raise DomainError("T must be at least 1")
    if not 0.0 < zeta <= 1.0:
        raise DomainError(f"damping factor must lie in (0, 1], got {zeta}")
    if kind not in FILTERS:
        raise DomainError(f"unknown linear filter {kind!r}")
    state = initial_state(system)
    mse, v_post, v_BA, history = [], [], [], []
    failed_at, error = None, ""
    for t in range(T):
        try:
            state_a = module_a_step(system, state, kind)
            new = module_b_step(system, state_a, prior, bayes=bayes)
            if t > 0:
                new = damp(new, state, zeta)
            new.iter = t + 1
            check_finite(new, t)
        except AmpLabError as exc:
            failed_at, error = t, str(exc)
            logger.warning("OAMP stopped at iteration %d: %s", t, exc)
            break
        delta = np.max(np.abs(new.v_BA - state.v_BA))
        state = new
        mse.append(section_mse(system, state.x_post))
        v_post.append(state.v_post.copy())
        v_BA.append(state.v_BA.copy())
        if record:
            history.append(snapshot(state))
        logger.debug("OAMP iteration %d: largest MSE %.4g", t, mse[-1].max())
        if tol is not None and delta < tol:
            break
    return OampResult(
        mse=np.array(mse).reshape(len(mse), system.L),
        v_post=np.array(v_post).reshape(len(v_post), system.L),
        v_BA=np.array(v_BA).reshape(len(v_BA), system.base.rows),
        state=state,
        failed_at=failed_at,
        error=error,
        history=history,
    )
