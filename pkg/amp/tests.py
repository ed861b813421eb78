"""
Tests for the AMP baseline and its density evolution.
"""

import numpy as np
from django.test import SimpleTestCase, tag

from amp.algorithm import amp_state_evolution, run_amp
from core.exceptions import ConfigError, DomainError
from coupling.base import uniform_base
from coupling.system import build_system, snr_db_to_sigma2
from denoiser.priors import Prior
from evolution.recursions import BAYES, CoupledModel, run_se
from oamp.algorithm import run_oamp
from spectra.transforms import Spectrum

BG = Prior.bernoulli_gaussian(0.1)
GAUSS = Prior.gaussian()
SIGMA2 = snr_db_to_sigma2(30.0)


def iid_system(L, W, N, delta, seed, prior=BG, sigma2=SIGMA2):
    M = int(delta * N)
    return build_system(uniform_base(L, W), N, M, Spectrum.iid_gaussian(delta), prior, sigma2, seed)


class RunAmpTests(SimpleTestCase):
    """Test AMP runs on finite systems."""

    def test_gaussian_prior_reaches_lmmse(self):
        system = iid_system(1, 0, 1024, 0.5, seed=0, prior=GAUSS, sigma2=1e-2)
        A = system.sections[0].operator.dense()
        estimate = A.T @ np.linalg.solve(1e-2 * np.eye(A.shape[0]) + A @ A.T, system.y[0])
        expected = np.mean((estimate - system.x) ** 2)
        result = run_amp(system, GAUSS, T=200)
        self.assertFalse(result.diverged)
        self.assertAlmostEqual(result.final_mse[0] / expected, 1.0, delta=0.01)

    def test_agrees_with_oamp(self):
        for W in (0, 1):
            amp_mse, oamp_mse = [], []
            for seed in range(3):
                system = iid_system(8, W, 512, 0.5, seed)
                amp_mse.append(run_amp(system, BG, T=100).largest_mse[-1])
                oamp_mse.append(run_oamp(system, BG, T=100).largest_mse[-1])
            self.assertAlmostEqual(np.mean(amp_mse) / np.mean(oamp_mse), 1.0, delta=0.15)

    def test_tracks_density_evolution(self):
        L, W, N, delta = 4, 1, 1024, 0.5
        predicted = amp_state_evolution(uniform_base(L, W), delta, BG, SIGMA2, T=30).v_post
        runs = [run_amp(iid_system(L, W, N, delta, seed), BG, T=30) for seed in range(8)]
        measured = np.mean([run.mse for run in runs], axis=0)
        for t in (1, 5, 30):
            self.assertAlmostEqual(
                measured[t - 1].mean() / predicted[t - 1].mean(), 1.0, delta=0.15
            )

    def test_history_shapes(self):
        result = run_amp(iid_system(3, 1, 64, 0.5, seed=1), BG, T=5)
        self.assertEqual(result.mse.shape, (5, 3))
        self.assertEqual(result.tau_r.shape, (5, 3))
        self.assertIsNone(result.failed_at)

    def test_requires_gaussian_sections(self):
        system = build_system(
            uniform_base(2, 1), 64, 32, Spectrum.row_orthogonal(0.5), BG, SIGMA2, seed=2
        )
        with self.assertRaises(ConfigError):
            run_amp(system, BG)

    def test_invalid_arguments(self):
        system = iid_system(2, 1, 64, 0.5, seed=3)
        with self.assertRaises(DomainError):
            run_amp(system, BG, T=0)
        with self.assertRaises(DomainError):
            run_amp(system, BG, zeta=1.5)


class AmpStateEvolutionTests(SimpleTestCase):
    """Test the density evolution of coupled AMP."""

    def test_uncoupled_fixed_point_matches_oamp(self):
        spectrum = Spectrum.iid_gaussian(0.5)
        oamp = run_se(CoupledModel(uniform_base(1, 0), spectrum, BG, SIGMA2), BAYES, tol=1e-14)
        amp = amp_state_evolution(uniform_base(1, 0), 0.5, BG, SIGMA2, T=1000, tol=1e-14)
        self.assertTrue(amp.converged)
        self.assertLess(abs(amp.final[0] - oamp.final[0]) / oamp.final[0], 1e-6)

    def test_first_iteration_from_the_zero_estimate(self):
        base = uniform_base(4, 1)
        result = amp_state_evolution(base, 0.5, GAUSS, 1e-2, T=1)
        E = (base.gamma**2).sum(axis=1)
        s = (base.gamma**2).T @ (1.0 / (1e-2 + E / 0.5))
        np.testing.assert_allclose(result.v_post[0], 1.0 / (1.0 + s))


@tag("slow")
class UnitConditionNumberTests(SimpleTestCase):
    """Test coupled OAMP with orthogonal-row sections against i.i.d. sections."""

    def test_matches_iid_gaussian_sections(self):
        L, W, N, delta = 8, 1, 512, 0.5
        iid, orthogonal = [], []
        for seed in range(20):
            iid.append(run_oamp(iid_system(L, W, N, delta, seed), BG, T=100).largest_mse[-1])
            system = build_system(
                uniform_base(L, W), N, int(delta * N), Spectrum.geometric(delta, 1.0), BG, SIGMA2, seed
            )
            orthogonal.append(run_oamp(system, BG, T=100).largest_mse[-1])
        self.assertAlmostEqual(np.mean(orthogonal) / np.mean(iid), 1.0, delta=0.15)
