"""
Damped Bayes-optimal AMP for spatially coupled systems with i.i.d. Gaussian
row sections, the baseline OAMP is compared against.

The recursion is the generalized-AMP form for a block variance profile:
block ``(ell, l)`` of the overall matrix has entries of variance
``gamma²[ell][l]/M``, so every variance message is a scalar per section.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import AmpLabError, ConfigError, DomainError, NumericalError
from denoiser.bayes import denoise, denoise_derivative, mmse
from evolution.recursions import SeResult, se_step_approx
from oamp.algorithm import section_mse
from spectra.rtransform import iid_r_transform
from spectra.transforms import IID_GAUSSIAN

logger = logging.getLogger(__name__)

AMP = "amp"
DIVERGENCE_FACTOR = 10.0


@dataclass
class AmpState:
    """Estimates per column section, residuals and their scalar variances."""

    x_hat: np.ndarray
    tau_x: np.ndarray
    s_hat: list
    tau_p: np.ndarray = None
    tau_s: np.ndarray = None
    r: np.ndarray = None
    tau_r: np.ndarray = None
    iter: int = 0


@dataclass
class AmpResult:
    mse: np.ndarray
    tau_r: np.ndarray
    state: AmpState
    diverged: bool = False
    failed_at: int = None
    error: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def iterations(self):
        return self.mse.shape[0]

    @property
    def largest_mse(self):
        return self.mse.max(axis=1) if self.mse.size else np.empty(0)

    @property
    def final_mse(self):
        return self.mse[-1] if self.mse.size else np.empty(0)


def initial_amp_state(system):
    L, N = system.L, system.N
    return AmpState(
        x_hat=np.zeros(L * N),
        tau_x=np.ones(L),
        s_hat=[np.zeros(system.M) for _ in system.sections],
    )


def output_step(system, state):
    """Residual messages ``s_hat[ell]`` with the Onsager term and their variances."""
    weights = system.base.gamma**2
    tau_p = (weights @ state.tau_x) / system.delta
    tau_s = 1.0 / (tau_p + system.sigma2)
    s_hat = []
    for ell, section in enumerate(system.sections):
        p = section.operator.matvec(section.signal(state.x_hat)) - tau_p[ell] * state.s_hat[ell]
        s_hat.append(tau_s[ell] * (system.y[ell] - p))
    return s_hat, tau_p, tau_s


def input_step(system, s_hat, tau_s):
    """Pre-denoising means ``r`` (stacked over column sections) and variances ``tau_r``."""
    weights = system.base.gamma**2
    tau_r = 1.0 / (weights.T @ tau_s)
    back = np.zeros(system.L * system.N)
    for ell, section in enumerate(system.sections):
        back += math.sqrt(section.width) * section.projector.adjoint(
            section.operator.rmatvec(s_hat[ell])
        )
    return back, tau_r


def run_amp(system, prior, T=100, zeta=1.0):
    """
    Run ``T`` iterations of damped AMP; damping acts on the mean and variance
    messages entering the denoiser.  The run stops early, flagged as
    diverged, once some section MSE exceeds ten times the prior variance.
    """
    if system.ensemble.kind != IID_GAUSSIAN:
        raise ConfigError("AMP is only defined here for i.i.d. Gaussian sections")
    if T < 1:
        raise DomainError("T must be at least 1")
    if not 0.0 < zeta <= 1.0:
        raise DomainError("damping factor must lie in (0, 1]")
    L, N = system.L, system.N
    state = initial_amp_state(system)
    mse_rows, tau_rows = [], []
    failed_at, error, diverged = None, "", False
    for t in range(T):
        try:
            s_hat, tau_p, tau_s = output_step(system, state)
            back, tau_r = input_step(system, s_hat, tau_s)
            r = state.x_hat + np.repeat(tau_r, N) * back
            if t > 0:
                r = zeta * r + (1.0 - zeta) * state.r
                tau_r = zeta * tau_r + (1.0 - zeta) * state.tau_r
            v = np.repeat(tau_r, N)
            x_hat = denoise(prior, r, v)
            derivative = denoise_derivative(prior, r, v).reshape(L, N).mean(axis=1)
            if not (np.all(np.isfinite(x_hat)) and np.all(np.isfinite(tau_r))):
                raise NumericalError("AMP estimate", t)
            state = AmpState(
                x_hat=x_hat,
                tau_x=tau_r * derivative,
                s_hat=s_hat,
                tau_p=tau_p,
                tau_s=tau_s,
                r=r,
                tau_r=tau_r,
                iter=t + 1,
            )
        except AmpLabError as exc:
            failed_at, error = t, str(exc)
            logger.warning("AMP stopped at iteration %d: %s", t, exc)
            break
        mse = section_mse(system, x_hat)
        mse_rows.append(mse)
        tau_rows.append(tau_r)
        logger.debug("AMP iteration %d: largest MSE %.3e", t, mse.max())
        if np.max(mse) > DIVERGENCE_FACTOR:
            diverged = True
            logger.warning("AMP diverged at iteration %d", t)
            break
    return AmpResult(
        mse=np.array(mse_rows).reshape(len(mse_rows), L),
        tau_r=np.array(tau_rows).reshape(len(tau_rows), L),
        state=state,
        diverged=diverged,
        failed_at=failed_at,
        error=error,
    )


def amp_state_evolution(base, delta, prior, sigma2, T=100, tol=0.0):
    """
    Density evolution of coupled AMP: the approximate recursion driven by
    ``R(z) = delta/(delta - z)`` started from the all-zero estimate.
    """
    R = iid_r_transform(delta)
    weights = base.gamma**2
    E = weights.sum(axis=1)
    s = weights.T @ (R(-E / sigma2) / sigma2)
    trajectory, messages = [], []
    converged = False
    for _ in range(T):
        current = np.asarray(mmse(prior, s))
        trajectory.append(current)
        messages.append(1.0 / s)
        if len(trajectory) > 1 and np.max(np.abs(current - trajectory[-2])) < tol:
            converged = True
            break
        E, s = se_step_approx(s, prior, R, sigma2, base)
    return SeResult(
        kind=AMP,
        v_post=np.array(trajectory),
        v_BA=np.array(messages),
        converged=converged,
        state=s,
    )
