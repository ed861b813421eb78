"""
Tests for long-memory OAMP and its covariance solver.
"""

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from core.exceptions import DomainError, NotPosDef
from coupling.base import uniform_base
from coupling.system import build_system, snr_db_to_sigma2
from denoiser.priors import Prior
from lmoamp.algorithm import (
    CovarianceSolver,
    initial_lm_state,
    lm_module_a_step,
    lm_module_b_step,
    lm_sufficient_statistic,
    posterior_cross_covariance,
    run_lmoamp,
)
from oamp.algorithm import LMMSE, filter_gains, section_module_a
from spectra.transforms import Spectrum

BG = Prior.bernoulli_gaussian(0.1)
SIGMA2 = snr_db_to_sigma2(30.0)


def coupled_system(seed, L=4, W=1, N=256, delta=0.5, spectrum=None):
    spectrum = spectrum or Spectrum.geometric(delta, 10.0)
    return build_system(uniform_base(L, W), N, int(delta * N), spectrum, BG, SIGMA2, seed)


class CovarianceSolverTests(SimpleTestCase):
    """Test the solve of V x = 1 for covariance messages."""

    def test_general_matrix(self):
        weights = CovarianceSolver().ones(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(weights, [1.0 / 3.0, 1.0 / 3.0])
        self.assertAlmostEqual(1.0 / weights.sum(), 1.5)

    def test_nested_structure_uses_the_last_message(self):
        V = np.array([[3.0, 2.0, 1.0], [2.0, 2.0, 1.0], [1.0, 1.0, 1.0]])
        solver = CovarianceSolver()
        np.testing.assert_allclose(solver.ones(V), [0.0, 0.0, 1.0])
        self.assertEqual(solver.warnings, 0)

    def test_small_residual_on_a_nearly_singular_matrix(self):
        V = np.array([[1.0 + 1e-6, 1.0 - 5e-10], [1.0 - 5e-10, 1.0]])
        solver = CovarianceSolver()
        weights = solver.ones(V)
        np.testing.assert_allclose(weights, np.linalg.solve(V, np.ones(2)), rtol=1e-5)
        self.assertGreater(weights[0], 4e-4)
        self.assertEqual(solver.warnings, 0)

    def test_scalar(self):
        np.testing.assert_allclose(CovarianceSolver().ones(np.array([[4.0]])), [0.25])

    def test_indefinite_matrix_rejected(self):
        with self.assertRaises(NotPosDef):
            CovarianceSolver().ones(np.array([[1.0, 2.0], [2.0, 1.0]]), ell=3)

    def test_asymmetric_matrix_rejected(self):
        with self.assertRaises(NotPosDef):
            CovarianceSolver().ones(np.array([[2.0, 1.0], [0.0, 2.0]]))

    def test_singular_matrix_falls_back(self):
        V = np.array([[1.0, 1.0, 0.5], [1.0, 1.0, 0.5], [0.5, 0.5, 2.0]])
        solver = CovarianceSolver()
        weights = solver.ones(V)
        self.assertTrue(np.all(np.isfinite(weights)))
        self.assertGreater(solver.warnings, 0)
        np.testing.assert_allclose(V @ weights, np.ones(3), atol=1e-6)


class LongMemoryModuleTests(SimpleTestCase):
    """Test single steps of long-memory OAMP."""

    def test_cross_covariance_of_equal_filters(self):
        system = coupled_system(0)
        section = system.sections[2]
        d = filter_gains(section.operator, 0.7, SIGMA2, LMMSE)
        _, _, eta_A, v_post = section_module_a(
            section, system.y[2], np.zeros(section.Nc), 0.7, SIGMA2, LMMSE
        )
        value = posterior_cross_covariance(section.operator, d, d, 0.7, SIGMA2)
        self.assertAlmostEqual(value / v_post, 1.0, places=10)

    def test_lmmse_cross_covariance_with_equal_variances(self):
        system = coupled_system(1)
        operator = system.sections[1].operator
        early = filter_gains(operator, 0.9, SIGMA2, LMMSE)
        late = filter_gains(operator, 0.3, SIGMA2, LMMSE)
        _, _, eta_late, _ = section_module_a(
            system.sections[1], system.y[1], np.zeros(operator.Nc), 0.3, SIGMA2, LMMSE
        )
        value = posterior_cross_covariance(operator, early, late, 0.3, SIGMA2)
        self.assertAlmostEqual(value / (eta_late * 0.3), 1.0, places=10)

    def test_onsager_weights_sum_to_eta_b(self):
        system = coupled_system(2)
        state = initial_lm_state(system)
        for _ in range(3):
            lm_module_a_step(system, state)
            lm_module_b_step(system, state, BG)
        for ell in range(system.base.rows):
            self.assertAlmostEqual(
                float(np.sum(state.eta_B_tau[ell])), state.eta_B[ell][-1], places=12
            )

    def test_sufficient_statistic_of_one_message(self):
        system = coupled_system(3)
        state = lm_module_a_step(system, initial_lm_state(system))
        x_suf, v_suf, weights, totals = lm_sufficient_statistic(
            system.base, state.X_AB, state.V_AB
        )
        v_AB = np.array([V[0, 0] for V in state.V_AB])
        np.testing.assert_allclose(totals, 1.0 / v_AB)
        self.assertEqual(x_suf.shape, (system.L, system.N))
        self.assertTrue(np.all(v_suf > 0))


class RunLongMemoryTests(SimpleTestCase):
    """Test long-memory OAMP against OAMP."""

    def test_single_iteration_identical(self):
        result = run_lmoamp(coupled_system(4), BG, T=1)
        self.assertLess(result.report.max_mean_dev, 1e-12)
        self.assertLess(result.report.max_var_dev, 1e-8)
        self.assertTrue(result.report.posdef_ok)

    @tag("slow")
    def test_equivalent_to_oamp(self):
        N = 1024
        for seed in range(20):
            system = coupled_system(seed, L=8, W=1, N=N, spectrum=Spectrum.row_orthogonal(0.5))
            result = run_lmoamp(system, BG, T=10)
            self.assertIsNone(result.failed_at)
            self.assertTrue(result.report.posdef_ok)
            self.assertLess(result.report.max_mse_dev, 2.0 / np.sqrt(N))
            self.assertEqual(result.report.compared_iterations, 10)

    def test_without_comparison(self):
        result = run_lmoamp(coupled_system(5), BG, T=4, compare=False)
        self.assertEqual(result.mse.shape, (4, 4))
        self.assertEqual(result.report.compared_iterations, 0)

    def test_invalid_iteration_counts(self):
        system = coupled_system(6)
        with self.assertRaises(DomainError):
            run_lmoamp(system, BG, T=0)
        with override_settings(AMPLAB={"LM_MAX_HISTORY": 4}):
            with self.assertRaises(DomainError):
                run_lmoamp(system, BG, T=5)
