"""
Tests for the OAMP modules on finite coupled systems.
"""

import numpy as np
from django.test import SimpleTestCase, tag

from core.exceptions import DomainError, SingularFilter
from coupling.base import uniform_base
from coupling.sections import DCT
from coupling.system import build_system, snr_db_to_sigma2
from denoiser.priors import Prior
from evolution.recursions import BAYES, CoupledModel, run_se
from oamp.algorithm import (
    LMMSE,
    MF,
    OampState,
    damp,
    denoise_sections,
    filter_gains,
    filter_traces,
    initial_state,
    module_a_step,
    module_b_step,
    run_oamp,
    section_module_a,
    sufficient_statistic,
)
from spectra.transforms import Spectrum

BG = Prior.bernoulli_gaussian(0.1)
GAUSS = Prior.gaussian()
SIGMA2 = snr_db_to_sigma2(30.0)


def single_section(sigma2=1e-2, prior=BG, N=64, M=32, seed=0):
    return build_system(uniform_base(1, 0), N, M, Spectrum.iid_gaussian(M / N), prior, sigma2, seed)


class ModuleATests(SimpleTestCase):
    """Test the linear filters against dense-matrix computations."""

    def setUp(self):
        self.system = single_section()
        self.section = self.system.sections[0]
        self.A = self.section.operator.dense()
        self.x_BA = np.random.default_rng(1).normal(scale=0.5, size=self.section.Nc)
        self.y = self.system.y[0]

    def test_matched_filter(self):
        v, sigma2, A = 0.8, self.system.sigma2, self.A
        nc = A.shape[1]
        x_AB, v_AB, eta_A, v_post = section_module_a(self.section, self.y, self.x_BA, v, sigma2, MF)
        residual = np.eye(nc) - A.T @ A
        expected_eta = 1.0 - np.trace(A.T @ A) / nc
        expected_post = sigma2 * np.trace(A @ A.T) / nc + v * np.trace(residual @ residual.T) / nc
        x_post = self.x_BA + A.T @ (self.y - A @ self.x_BA)
        self.assertAlmostEqual(eta_A, expected_eta, places=10)
        self.assertAlmostEqual(v_post, expected_post, places=10)
        np.testing.assert_allclose(
            x_AB, (x_post - expected_eta * self.x_BA) / (1.0 - expected_eta), atol=1e-10
        )
        self.assertAlmostEqual(
            v_AB, (expected_post - expected_eta**2 * v) / (1.0 - expected_eta) ** 2, places=10
        )

    def test_lmmse_filter(self):
        v, sigma2, A = 0.8, self.system.sigma2, self.A
        nc = A.shape[1]
        F_T = v * A.T @ np.linalg.inv(sigma2 * np.eye(A.shape[0]) + v * A @ A.T)
        _, _, eta_A, v_post = section_module_a(self.section, self.y, self.x_BA, v, sigma2, LMMSE)
        self.assertAlmostEqual(eta_A, 1.0 - np.trace(F_T @ A) / nc, places=10)
        residual = np.eye(nc) - F_T @ A
        general = sigma2 * np.trace(F_T @ F_T.T) / nc + v * np.trace(residual @ residual.T) / nc
        self.assertAlmostEqual(v_post / general, 1.0, places=10)
        self.assertAlmostEqual(v_post, eta_A * v, places=12)

    def test_trace_identity_matches_dense_path(self):
        d = filter_gains(self.section.operator, 0.8, self.system.sigma2, LMMSE)
        trace_ff, trace_fa, _ = filter_traces(self.section.operator, d)
        F_T = 0.8 * self.A.T @ np.linalg.inv(
            self.system.sigma2 * np.eye(self.A.shape[0]) + 0.8 * self.A @ self.A.T
        )
        self.assertAlmostEqual(trace_ff, np.trace(F_T.T @ F_T), places=10)
        self.assertAlmostEqual(trace_fa, np.trace(F_T @ self.A), places=10)

    def test_huge_noise_is_singular(self):
        system = single_section(sigma2=1e20)
        section = system.sections[0]
        with self.assertRaises(SingularFilter):
            section_module_a(section, system.y[0], np.zeros(section.Nc), 1.0, 1e20, LMMSE)

    def test_huge_noise_stops_the_run(self):
        result = run_oamp(single_section(sigma2=1e20), BG, T=5)
        self.assertEqual(result.failed_at, 0)
        self.assertEqual(result.iterations, 0)

    def test_nonpositive_variance_rejected(self):
        with self.assertRaises(DomainError):
            section_module_a(self.section, self.y, self.x_BA, 0.0, 1e-2, LMMSE)


class SufficientStatisticTests(SimpleTestCase):
    """Test the combination of extracted messages per column section."""

    def test_uncoupled_passthrough(self):
        x_AB = [np.array([1.0, 2.0]), np.array([3.0, 4.0])]
        x_suf, v_suf = sufficient_statistic(uniform_base(2, 0), x_AB, [0.5, 2.0])
        np.testing.assert_allclose(x_suf, [[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(v_suf, [0.5, 2.0])

    def test_harmonic_combination(self):
        a, b, c, d = (np.array([value]) for value in (1.0, 2.0, 3.0, 4.0))
        x_AB = [a, np.concatenate((b, c)), d]
        x_suf, v_suf = sufficient_statistic(uniform_base(2, 1), x_AB, [1.0, 3.0, 1.0])
        gamma = 1.0 / np.sqrt(2.0)
        self.assertAlmostEqual(v_suf[0], 1.5)
        self.assertAlmostEqual(x_suf[0, 0], 1.5 * gamma * (1.0 + 2.0 / 3.0))
        self.assertAlmostEqual(x_suf[1, 0], 1.5 * gamma * (3.0 / 3.0 + 4.0))

    def test_nonpositive_variance_rejected(self):
        with self.assertRaises(DomainError):
            sufficient_statistic(uniform_base(2, 0), [np.ones(1), np.ones(1)], [1.0, 0.0])


class ModuleBTests(SimpleTestCase):
    """Test denoising and the Onsager correction."""

    def test_gaussian_denoising(self):
        x_suf = np.random.default_rng(2).normal(size=(2, 5))
        v_suf = np.array([0.5, 2.0])
        x_post, v_post, mean_derivative = denoise_sections(GAUSS, x_suf, v_suf)
        np.testing.assert_allclose(x_post, x_suf / (1.0 + v_suf[:, None]))
        np.testing.assert_allclose(v_post, v_suf / (1.0 + v_suf))
        np.testing.assert_allclose(mean_derivative, 1.0 / (1.0 + v_suf))

    def test_bayes_shortcut_matches_general_variance(self):
        system = build_system(
            uniform_base(3, 1), 64, 32, Spectrum.row_orthogonal(0.5), BG, SIGMA2, seed=3
        )
        state_a = module_a_step(system, initial_state(system))
        bayes = module_b_step(system, state_a, BG, bayes=True)
        general = module_b_step(system, state_a, BG, bayes=False)
        np.testing.assert_allclose(bayes.v_BA, general.v_BA, rtol=1e-8)
        for a, b in zip(bayes.x_BA, general.x_BA):
            np.testing.assert_array_equal(a, b)

    def test_damping(self):
        new = OampState(x_BA=[np.array([2.0, 4.0])], v_BA=np.array([1.0]))
        old = OampState(x_BA=[np.array([0.0, 0.0])], v_BA=np.array([3.0]))
        self.assertIs(damp(new, old, 1.0), new)
        damped = damp(new, old, 0.5)
        np.testing.assert_allclose(damped.x_BA[0], [1.0, 2.0])
        np.testing.assert_allclose(damped.v_BA, [2.0])


class RunOampTests(SimpleTestCase):
    """Test complete OAMP runs."""

    def test_gaussian_prior_reaches_lmmse_in_one_iteration(self):
        system = single_section(sigma2=1e-2, prior=GAUSS, N=256, M=128, seed=5)
        A = system.sections[0].operator.dense()
        expected = A.T @ np.linalg.solve(1e-2 * np.eye(128) + A @ A.T, system.y[0])
        result = run_oamp(system, GAUSS, T=4)
        np.testing.assert_allclose(result.state.x_post, expected, atol=1e-8)
        np.testing.assert_allclose(result.mse, result.mse[0:1].repeat(4, axis=0), rtol=1e-8)

    def test_unit_damping_is_undamped(self):
        system = build_system(
            uniform_base(4, 1), 128, 64, Spectrum.geometric(0.5, 10.0), BG, SIGMA2, seed=4
        )
        default = run_oamp(system, BG, T=6)
        damped = run_oamp(system, BG, T=6, zeta=1.0)
        np.testing.assert_array_equal(default.mse, damped.mse)

    def test_tolerance_stops_early(self):
        system = build_system(
            uniform_base(4, 1), 128, 64, Spectrum.row_orthogonal(0.5), BG, SIGMA2, seed=6
        )
        result = run_oamp(system, BG, T=100, tol=1e-3)
        self.assertLess(result.iterations, 100)

    def test_invalid_arguments(self):
        system = single_section()
        with self.assertRaises(DomainError):
            run_oamp(system, BG, T=0)
        with self.assertRaises(DomainError):
            run_oamp(system, BG, zeta=0.0)
        with self.assertRaises(DomainError):
            run_oamp(system, BG, kind="wiener")

    def test_history_recorded(self):
        system = single_section()
        result = run_oamp(system, BG, T=3, record=True)
        self.assertEqual(len(result.history), 3)
        self.assertEqual(result.largest_mse.shape, (3,))

    @tag("slow")
    def test_tracks_state_evolution(self):
        L, W, N, delta = 8, 1, 2048, 0.3
        M = int(delta * N)
        spectrum = Spectrum.row_orthogonal(delta)
        predicted = run_se(CoupledModel(uniform_base(L, W), spectrum, BG, SIGMA2), BAYES, T=20, tol=0.0)
        runs = [
            run_oamp(build_system(uniform_base(L, W), N, M, spectrum, BG, SIGMA2, seed, DCT), BG, T=20)
            for seed in range(100)
        ]
        measured = np.mean([run.mse for run in runs], axis=0)
        for t in (1, 5, 20):
            np.testing.assert_allclose(measured[t - 1], predicted.v_post[t - 1], rtol=0.10)
