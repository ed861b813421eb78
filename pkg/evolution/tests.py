"""
Tests for the state-evolution recursions and the change of variables to (E, s).
"""

import numpy as np
from django.test import SimpleTestCase
from scipy import optimize

from core.exceptions import DomainError
from coupling.base import uniform_base
from coupling.system import snr_db_to_sigma2
from denoiser.bayes import mmse
from denoiser.priors import Prior
from evolution.recursions import (
    APPROX,
    BAYES,
    LM,
    OAMP,
    CoupledModel,
    SeState,
    se_step_bayes,
    se_step_general,
    run_se,
)
from oamp.algorithm import LMMSE, MF, ZF
from spectra.rtransform import limit_r_transform
from spectra.transforms import Spectrum, r_transform

BG = Prior.bernoulli_gaussian(0.1)
SIGMA2 = snr_db_to_sigma2(30.0)


def model(L, W, spectrum, prior=BG, sigma2=SIGMA2):
    return CoupledModel(uniform_base(L, W), spectrum, prior, sigma2)


class ThresholdSaturationTests(SimpleTestCase):
    """Test the inward wave front of the coupled recursion."""

    def test_coupled_reaches_the_good_fixed_point(self):
        spectrum = Spectrum.iid_gaussian(0.18)
        good = run_se(model(1, 0, spectrum), BAYES, init_v=1e-6).final[0]
        bad = run_se(model(1, 0, spectrum), BAYES).final[0]
        coupled = run_se(model(50, 1, spectrum), BAYES, T=5000)
        self.assertIsNone(coupled.failed_at)
        self.assertTrue(np.all(coupled.final <= good + 1e-6))
        self.assertGreater(bad, 10.0 * good)

    def test_boundary_sections_lead(self):
        result = run_se(model(50, 1, Spectrum.iid_gaussian(0.18)), BAYES, T=100, tol=0.0)
        profile = result.v_post[-1]
        self.assertLess(profile[0], profile[25])
        self.assertLess(profile[-1], profile[25])


class BayesRecursionTests(SimpleTestCase):
    """Test the Bayes-optimal OAMP recursion."""

    def test_fixed_iteration_count_without_tolerance(self):
        result = run_se(model(4, 1, Spectrum.iid_gaussian(0.5)), BAYES, T=3, tol=0.0)
        self.assertEqual(result.iterations, 3)
        self.assertFalse(result.converged)

    def test_converges(self):
        result = run_se(model(4, 1, Spectrum.geometric(0.5, 10.0)), BAYES)
        self.assertTrue(result.converged)
        self.assertIsNone(result.failed_at)

    def test_bulk_initial_variance(self):
        self.assertAlmostEqual(model(6, 2, Spectrum.iid_gaussian(0.5)).initial_v()[3], 1.0)

    def test_posterior_variance_nonincreasing(self):
        result = run_se(model(8, 1, Spectrum.geometric(0.3, 10.0)), BAYES, T=60, tol=0.0)
        self.assertTrue(np.all(np.diff(result.v_post, axis=0) <= 1e-12))

    def test_general_recursion_with_lmmse_matches_bayes(self):
        coupled = model(8, 1, Spectrum.geometric(0.4, 10.0))
        bayes = run_se(coupled, BAYES, T=30, tol=0.0)
        general = run_se(coupled, OAMP, T=30, tol=0.0, filter_kind=LMMSE)
        np.testing.assert_allclose(general.v_post, bayes.v_post, rtol=1e-9)
        np.testing.assert_allclose(general.v_BA, bayes.v_BA, rtol=1e-9)

    def test_fixed_point_report(self):
        report = run_se(model(4, 1, Spectrum.iid_gaussian(0.5)), BAYES).fixed_point()
        self.assertEqual(report["kind"], BAYES)
        self.assertLessEqual(report["average_mse"], report["largest_mse"])

    def test_uncoupled_fixed_point_is_an_extremizer(self):
        spectrum = Spectrum.iid_gaussian(0.5)
        result = run_se(model(1, 0, spectrum), BAYES, tol=1e-14)
        s = 1.0 / result.state.v_suf[0]
        E = result.state.v_post[0]
        self.assertLess(abs(E - mmse(BG, s)) / E, 1e-6)
        g = r_transform(spectrum, -E / SIGMA2) / SIGMA2
        self.assertLess(abs(s - g) / s, 1e-6)

    def test_unknown_kind(self):
        with self.assertRaises(DomainError):
            run_se(model(2, 0, Spectrum.iid_gaussian(0.5)), "bp")

    def test_zero_iterations_rejected(self):
        with self.assertRaises(DomainError):
            run_se(model(2, 0, Spectrum.iid_gaussian(0.5)), BAYES, T=0)


class ChangeOfVariablesTests(SimpleTestCase):
    """Test the (E, s) view of the Bayes recursion."""

    def test_identities_hold_along_the_trajectory(self):
        coupled = model(8, 1, Spectrum.geometric(0.4, 10.0))
        result = run_se(coupled, BAYES, T=20, tol=0.0, es=True)
        self.assertIsNone(result.failed_at)
        self.assertEqual(len(result.es_history), 20)
        for es in result.es_history:
            self.assertLess(es.identity_residual, 1e-6)

    def test_energy_is_weighted_posterior_variance(self):
        coupled = model(6, 2, Spectrum.iid_gaussian(0.4))
        state = se_step_bayes(coupled, SeState(v_BA=coupled.initial_v()))
        result = run_se(coupled, BAYES, T=1, es=True)
        es = result.es_history[0]
        np.testing.assert_allclose(es.E, coupled.weights @ state.v_post)
        np.testing.assert_allclose(es.s, 1.0 / state.v_suf)


class GeneralFilterTests(SimpleTestCase):
    """Test the trace functionals of the matched and zero-forcing filters."""

    coupled = model(1, 0, Spectrum.row_orthogonal(0.5), sigma2=0.01)

    def test_matched_filter(self):
        state = se_step_general(self.coupled, SeState(v_BA=np.ones(1)), MF)
        self.assertAlmostEqual(state.eta_A[0], 0.0)
        self.assertAlmostEqual(state.v_AB[0], 1.01)

    def test_zero_forcing(self):
        state = se_step_general(self.coupled, SeState(v_BA=np.ones(1)), ZF)
        self.assertAlmostEqual(state.eta_A[0], 0.5)
        self.assertAlmostEqual(state.v_AB[0], (0.0025 + 0.5 - 0.25) / 0.25)

    def test_zero_forcing_unbounded_for_square_gaussian(self):
        square = model(1, 0, Spectrum.iid_gaussian(1.0))
        with self.assertRaises(DomainError):
            se_step_general(square, SeState(v_BA=np.ones(1)), ZF)

    def test_unknown_filter(self):
        with self.assertRaises(DomainError):
            se_step_general(self.coupled, SeState(v_BA=np.ones(1)), "wiener")


class LongMemoryRecursionTests(SimpleTestCase):
    """Test the covariance recursions of long-memory OAMP."""

    def test_diagonal_matches_bayes(self):
        coupled = model(6, 1, Spectrum.row_orthogonal(0.3))
        bayes = run_se(coupled, BAYES, T=30, tol=0.0)
        lm = run_se(coupled, LM, T=30, tol=0.0)
        self.assertIsNone(lm.failed_at)
        np.testing.assert_allclose(lm.v_post, bayes.v_post, rtol=0.0, atol=1e-10)
        np.testing.assert_allclose(lm.v_BA, bayes.v_BA, rtol=0.0, atol=1e-10)

    def test_posterior_covariances_equal_the_diagonal(self):
        coupled = model(6, 1, Spectrum.iid_gaussian(0.3))
        lm = run_se(coupled, LM, T=30, tol=0.0)
        self.assertIsNone(lm.failed_at)
        for V in lm.state.V_post:
            later = V[1:, 1:]
            for t in range(later.shape[0]):
                np.testing.assert_allclose(later[: t + 1, t], later[t, t], rtol=0.0, atol=1e-10)

    def test_sufficient_statistics_are_nested(self):
        lm = run_se(model(6, 1, Spectrum.geometric(0.4, 10.0)), LM, T=8, tol=0.0)
        self.assertIsNone(lm.failed_at)
        for ell, V in enumerate(lm.state.V_AB):
            history = lm.state.weights[ell]
            last = history[-1]
            for s, w in enumerate(history):
                self.assertAlmostEqual(
                    (w @ V[: s + 1, :] @ last) / np.sum(w), 1.0, places=6
                )

    def test_gaussian_covariances_without_the_nested_shortcut(self):
        coupled = model(4, 1, Spectrum.iid_gaussian(0.3), prior=Prior.gaussian(), sigma2=1e-2)
        lm = run_se(coupled, LM, T=10, tol=0.0, exact_nested=False)
        self.assertIsNone(lm.failed_at)
        for V in lm.state.V_post:
            later = V[1:, 1:]
            for t in range(later.shape[0]):
                np.testing.assert_allclose(later[: t + 1, t], later[t, t], rtol=1e-6)

    def test_quadrature_covariances_match_the_shortcut(self):
        coupled = model(4, 1, Spectrum.iid_gaussian(0.3), sigma2=1.0)
        nested = run_se(coupled, LM, T=8, tol=0.0)
        quadrature = run_se(coupled, LM, T=8, tol=0.0, exact_nested=False)
        self.assertIsNone(quadrature.failed_at)
        np.testing.assert_allclose(quadrature.v_post, nested.v_post, rtol=1e-4)
        for V in quadrature.state.V_post:
            later = V[1:, 1:]
            for t in range(later.shape[0]):
                np.testing.assert_allclose(later[: t + 1, t], later[t, t], rtol=1e-4)

    def test_module_a_covariances_are_symmetric_and_positive(self):
        lm = run_se(model(6, 1, Spectrum.geometric(0.4, 10.0)), LM, T=8, tol=0.0)
        for V in lm.state.V_AB:
            np.testing.assert_allclose(V, V.T, atol=1e-12)
            self.assertGreaterEqual(np.linalg.eigvalsh(V).min(), -1e-8 * np.abs(V).max())


class ApproximateRecursionTests(SimpleTestCase):
    """Test the recursion driven by a single R-transform."""

    def test_gaussian_fixed_point(self):
        delta = 0.4
        spectrum = Spectrum.iid_gaussian(delta)
        uncoupled = model(1, 0, spectrum, prior=Prior.gaussian())
        R = limit_r_transform(spectrum)
        result = run_se(uncoupled, APPROX, R=R, tol=1e-15, T=2000)

        def drift(E):
            return E - 1.0 / (1.0 + delta / (delta * SIGMA2 + E))

        expected = optimize.brentq(drift, 1e-12, 1.0, xtol=1e-15)
        self.assertAlmostEqual(result.final[0], expected, delta=1e-8)

    def test_uncoupled_iid_matches_exact_recursion(self):
        spectrum = Spectrum.iid_gaussian(0.5)
        uncoupled = model(1, 0, spectrum)
        exact = run_se(uncoupled, BAYES, tol=1e-14)
        approx = run_se(uncoupled, APPROX, R=limit_r_transform(spectrum), tol=1e-14)
        self.assertLess(abs(approx.final[0] - exact.final[0]) / exact.final[0], 1e-6)

    def test_needs_r_transform(self):
        with self.assertRaises(DomainError):
            run_se(model(2, 0, Spectrum.iid_gaussian(0.5)), APPROX)
