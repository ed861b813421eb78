"""
Experiment drivers behind the management commands.

Every driver takes a validated configuration and returns the CSV header,
the CSV rows and a JSON-ready summary.
"""

import logging
import math

import numpy as np

from amp.algorithm import run_amp
from coupling.base import uniform_base
from coupling.system import build_system, snr_db_to_sigma2
from denoiser.priors import Prior
from evolution.recursions import APPROX, BAYES, LM, CoupledModel, run_se
from lmoamp.algorithm import run_lmoamp
from oamp.algorithm import run_oamp
from potential.landscape import (
    bp_threshold,
    coupled_threshold,
    optimality_gap,
    potential_curve,
    potential_threshold,
    r_family,
)
from spectra.rtransform import limit_r_transform, spectrum_r_transform
from spectra.transforms import (
    Spectrum,
    eta_transform,
    moments,
    r_transform,
    r_transform_identities_check,
    z_min,
)

from .serializers import LM_OAMP, OAMP
from .trials import run_trials

logger = logging.getLogger(__name__)


def prior_from_config(config):
    return Prior.from_dict(config)


def spectrum_from_config(config, delta=None):
    delta = config["delta"] if delta is None else delta
    return Spectrum.from_dict(
        {"kind": config["ensemble"], "delta": delta, "kappa": config.get("kappa", 1.0)}
    )


def model_from_config(config):
    return CoupledModel(
        base=uniform_base(config["L"], config["W"]),
        spectrum=spectrum_from_config(config),
        prior=prior_from_config(config),
        sigma2=snr_db_to_sigma2(config["snr_db"]),
    )


def system_from_config(config, seed):
    prior = prior_from_config(config)
    system = build_system(
        base=uniform_base(config["L"], config["W"]),
        N=config["N"],
        M=config["M"],
        ensemble=spectrum_from_config(config, config["M"] / config["N"]),
        prior=prior,
        sigma2=snr_db_to_sigma2(config["snr_db"]),
        seed=seed,
        basis=config["basis"],
    )
    return system, prior


EQUIVALENCE_KEYS = ("max_mean_dev", "max_var_dev", "posdef_ok")


def simulate_trial(config, seed):
    """
    Run one trial and return ``(mse trajectory, failed_at, equivalence)``.
    ``equivalence`` is the LM-OAMP against OAMP report and ``None`` for the
    other algorithms.
    """
    system, prior = system_from_config(config, seed)
    algo = config["algo"]
    if algo == OAMP:
        result = run_oamp(
            system,
            prior,
            kind=config["filter"],
            T=config["T"],
            zeta=config["zeta"],
            tol=config.get("tol"),
        )
    elif algo == LM_OAMP:
        result = run_lmoamp(system, prior, T=config["T"], compare=True)
        report = result.report.to_dict()
        return result.mse, result.failed_at, {key: report[key] for key in EQUIVALENCE_KEYS}
    else:
        result = run_amp(system, prior, T=config["T"], zeta=config["zeta"])
    return result.mse, result.failed_at, None


def merge_equivalence(reports):
    """Worst case over the trials of a sweep point."""
    return {
        "max_mean_dev": max(r["max_mean_dev"] for r in reports),
        "max_var_dev": max(r["max_var_dev"] for r in reports),
        "posdef_ok": all(r["posdef_ok"] for r in reports),
    }


def simulate(points, seed, workers=None):
    """
    Monte-Carlo runs for every sweep point.  Rows are
    ``(point, trial, iter, section, mse)``; the summary holds the mean and
    standard deviation of the final largest-section MSE per point, and for
    LM-OAMP the equivalence report of every trial.
    """
    rows, summary = [], {"points": []}
    for index, config in enumerate(points):
        outcomes = run_trials(
            lambda trial, stream: simulate_trial(config, stream),
            seed,
            config["trials"],
            workers,
        )
        finals, failures, reports = [], 0, []
        for trial, (mse, failed_at, equivalence) in enumerate(outcomes):
            failures += failed_at is not None
            if equivalence is not None:
                reports.append(equivalence)
            for t, values in enumerate(mse):
                for l, value in enumerate(values):
                    rows.append((index, trial, t, l, float(value)))
            if len(mse):
                finals.append(float(np.max(mse[-1])))
        finals = np.array(finals)
        point = {
            "algo": config["algo"],
            "M": config["M"],
            "delta": config["M"] / config["N"],
            "zeta": config["zeta"],
            "trials": config["trials"],
            "failed_trials": failures,
            "largest_mse_mean": float(finals.mean()) if finals.size else None,
            "largest_mse_std": float(finals.std()) if finals.size else None,
        }
        if reports:
            point["equivalence"] = merge_equivalence(reports)
            point["trial_equivalence"] = reports
        summary["points"].append(point)
        logger.info("sweep point %d: %d trials", index, config["trials"])
    return ["point", "trial", "iter", "section", "mse"], rows, summary


def state_evolution(config):
    """
    Per-section trajectory of the selected recursion.  The approximate
    recursion is driven by the infinite-width R-transform and also reports
    its difference to the exact Bayes recursion.
    """
    model = model_from_config(config)
    kind = config["kind"]
    common = {"T": config["T"], "tol": config.get("tol"), "init_v": config.get("init_v")}
    R = limit_r_transform(model.spectrum) if kind == APPROX else None
    result = run_se(model, kind, filter_kind=config["filter"], R=R, **common)
    header = ["iter", "section", "v_post"]
    reference = None
    if kind == APPROX:
        reference = run_se(model, BAYES, **common).v_post
        header += ["bayes_v_post", "diff"]
    rows = []
    for t, values in enumerate(result.v_post):
        for l, value in enumerate(values):
            row = [t, l, float(value)]
            if reference is not None:
                exact = float(reference[min(t, len(reference) - 1), l])
                row += [exact, float(value) - exact]
            rows.append(row)
    summary = result.fixed_point()
    summary["error"] = result.error
    if kind == LM:
        summary["diagonal_only"] = True
    return header, rows, summary


def _r_source(config, spectrum):
    if config["r_source"] == "limit":
        return limit_r_transform(spectrum)
    return spectrum_r_transform(spectrum)


def potential(config):
    """Potential curve ``(E, F)`` and its minimizers."""
    prior = prior_from_config(config)
    spectrum = spectrum_from_config(config)
    R = _r_source(config, spectrum)
    sigma2 = snr_db_to_sigma2(config["snr_db"])
    curve = potential_curve(prior, R, sigma2, config.get("grid_n"), delta=spectrum.delta)
    rows = [(float(e), float(f)) for e, f in zip(curve.E_grid, curve.F_values)]
    summary = curve.to_dict()
    if config.get("snr_db_list"):
        points = optimality_gap(
            prior, R, [snr_db_to_sigma2(snr) for snr in config["snr_db_list"]], config.get("grid_n")
        )
        summary["optimality"] = [
            {"sigma2": p.sigma2, "E_opt": p.E_opt, "s_opt": p.s_opt, "scaled_sinr": p.scaled_sinr}
            for p in points
        ]
    return ["E", "F"], rows, summary


def thresholds(config):
    """
    Coupled thresholds for every ``(kappa, W)`` pair, plus the BP and
    potential thresholds of each ``kappa`` when ``potential`` is set.
    """
    prior = prior_from_config(config)
    sigma2 = snr_db_to_sigma2(config["snr_db"])
    kappas = config.get("kappas", [config["kappa"]])
    widths = config.get("Ws", [config["W"]])
    bracket = config.get("bracket")
    rows, summary = [], {"thresholds": []}
    for kappa in kappas:
        entry = {"kappa": kappa}
        if config["potential"]:
            family = r_family(config["ensemble"], kappa)
            bp = bp_threshold(prior, family, sigma2, bracket, config.get("tol"), config.get("grid_n"))
            opt = potential_threshold(
                prior, family, sigma2, bracket, config.get("tol"), config.get("grid_n")
            )
            entry.update({"delta_BP": bp.delta, "delta_opt": opt.delta, "monotone": bp.monotone})
        for width in widths:
            result = coupled_threshold(
                prior,
                config["ensemble"],
                sigma2,
                config["L"],
                width,
                kappa=kappa,
                T=config.get("T"),
                bracket=bracket,
                tol=config.get("tol"),
            )
            rows.append((kappa, width, result.delta, result.rate_adjusted))
            entry.setdefault("coupled", []).append(
                {"W": width, "delta_SC": result.delta, "rate_adjusted": result.rate_adjusted}
            )
        summary["thresholds"].append(entry)
    return ["kappa", "W", "delta_SC", "rate_adjusted"], rows, summary


def spectrum_table(config):
    """η and R on a grid of ``z`` plus the identity report of the section law."""
    spectrum = spectrum_from_config(config).section(config["width"])
    z = np.linspace(0.0, config["z_max"], config["points"])
    floor = z_min(spectrum)
    rows = []
    for value in z:
        r = float(r_transform(spectrum, -value)) if -value > floor else float("nan")
        rows.append((float(value), float(eta_transform(spectrum, value)), r))
    report = r_transform_identities_check(spectrum)
    mu1, mu2 = moments(spectrum, 2)
    summary = {
        "spectrum": spectrum.to_dict(),
        "z_min": floor if math.isfinite(floor) else None,
        "mu1": mu1,
        "mu2": mu2,
        "r0": report.r0,
        "r_prime": report.r_prime,
        "r0_residual": report.r0_residual,
        "r_prime_residual": report.r_prime_residual,
    }
    return ["z", "eta", "R"], rows, summary
