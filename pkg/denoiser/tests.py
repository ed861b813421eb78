"""
Tests for priors, Bayes-optimal denoisers, MMSE and mutual information.
"""

import math

import numpy as np
from django.test import SimpleTestCase, override_settings
from scipy import integrate

from core.exceptions import ConfigError, DomainError
from denoiser.bayes import (
    denoise,
    denoise_derivative,
    error_covariance,
    information_table,
    mmse,
    mutual_info,
    posterior_variance,
)
from denoiser.priors import Prior

BG = Prior.bernoulli_gaussian(0.1)
GAUSS = Prior.gaussian()


def posterior_mean_by_quadrature(prior, u, v):
    """Posterior mean of the Bernoulli-Gaussian prior by direct integration."""
    var = prior.nonzero_variance

    def likelihood(x):
        return math.exp(-((u - x) ** 2) / (2 * v)) / math.sqrt(2 * math.pi * v)

    def slab(x):
        return math.exp(-(x**2) / (2 * var)) / math.sqrt(2 * math.pi * var)

    num, _ = integrate.quad(
        lambda x: prior.rho * x * slab(x) * likelihood(x), -15, 15, epsabs=0, epsrel=1e-13
    )
    den, _ = integrate.quad(
        lambda x: prior.rho * slab(x) * likelihood(x), -15, 15, epsabs=0, epsrel=1e-13
    )
    den += (1 - prior.rho) * likelihood(0.0)
    return num / den


class PriorTests(SimpleTestCase):
    """Test prior construction and sampling."""

    def test_invalid_rho(self):
        with self.assertRaises(DomainError):
            Prior.bernoulli_gaussian(0.0)

    def test_unknown_kind(self):
        with self.assertRaises(ConfigError):
            Prior("laplace", 0.5)

    def test_information_dimension(self):
        self.assertEqual(BG.info_dimension, 0.1)
        self.assertEqual(GAUSS.info_dimension, 1.0)

    def test_unit_second_moment(self):
        samples = BG.sample(np.random.default_rng(0), 2_000_000)
        self.assertAlmostEqual(np.mean(samples**2), 1.0, delta=0.03)
        self.assertAlmostEqual(np.mean(samples != 0), 0.1, delta=0.005)


class DenoiserTests(SimpleTestCase):
    """Test the posterior mean and its derivative."""

    def test_gaussian_denoiser(self):
        self.assertAlmostEqual(denoise(GAUSS, 2.0, 0.5), 2.0 / 1.5)

    def test_odd_symmetry(self):
        self.assertEqual(denoise(BG, 0.0, 0.3), 0.0)
        self.assertAlmostEqual(denoise(BG, -1.3, 0.3), -denoise(BG, 1.3, 0.3))

    def test_matches_posterior_quadrature(self):
        self.assertAlmostEqual(
            denoise(BG, 1.0, 0.5), posterior_mean_by_quadrature(BG, 1.0, 0.5), places=10
        )

    def test_nonpositive_variance_rejected(self):
        for func in (denoise, denoise_derivative, posterior_variance):
            with self.assertRaises(DomainError):
                func(BG, 1.0, 0.0)

    def test_large_inputs_do_not_overflow(self):
        value = denoise(BG, 1e3, 1e-6)
        self.assertTrue(math.isfinite(value))
        self.assertAlmostEqual(value / 1e3, 1.0, places=5)

    def test_derivative_matches_finite_difference(self):
        u, v, h = 0.7, 0.3, 1e-6
        numeric = (denoise(BG, u + h, v) - denoise(BG, u - h, v)) / (2 * h)
        self.assertLess(abs(denoise_derivative(BG, u, v) / numeric - 1), 1e-6)

    def test_gaussian_derivative(self):
        self.assertAlmostEqual(denoise_derivative(GAUSS, 3.0, 0.25), 0.8)

    def test_rho_one_matches_gaussian(self):
        dense = Prior.bernoulli_gaussian(1.0)
        u = np.linspace(-3, 3, 11)
        np.testing.assert_allclose(denoise(dense, u, 0.4), denoise(GAUSS, u, 0.4), atol=1e-12)
        self.assertAlmostEqual(mmse(dense, 2.0), mmse(GAUSS, 2.0), places=12)

    def test_posterior_variance_identity(self):
        u = np.linspace(-4, 4, 41)
        np.testing.assert_allclose(
            posterior_variance(BG, u, 0.2), 0.2 * denoise_derivative(BG, u, 0.2), atol=1e-10
        )

    def test_gaussian_posterior_variance(self):
        np.testing.assert_allclose(posterior_variance(GAUSS, np.array([0.0, 5.0]), 1.0), 0.5)

    def test_posterior_variance_consistency(self):
        rng = np.random.default_rng(7)
        v = 0.05
        x = BG.sample(rng, 4_000_000)
        u = x + math.sqrt(v) * rng.normal(size=x.size)
        average = np.mean(posterior_variance(BG, u, v))
        self.assertLess(abs(average / mmse(BG, 1 / v) - 1), 0.005)

    def test_bayes_orthogonality(self):
        rng = np.random.default_rng(8)
        v = 0.1
        x = BG.sample(rng, 400_000)
        f = denoise(BG, x + math.sqrt(v) * rng.normal(size=x.size), v)
        products = (x - f) * f
        self.assertLess(abs(products.mean()), 3 * products.std() / math.sqrt(x.size))


class MmseTests(SimpleTestCase):
    """Test the MMSE function."""

    def test_gaussian(self):
        self.assertAlmostEqual(mmse(GAUSS, 3.0), 0.25)

    def test_zero_snr(self):
        self.assertEqual(mmse(BG, 0.0), 1.0)
        self.assertEqual(mmse(GAUSS, 0.0), 1.0)

    def test_trivial_upper_bound(self):
        for s in (1.0, 10.0, 100.0):
            self.assertLessEqual(mmse(BG, s), min(1.0, 1.0 / s))

    def test_strictly_decreasing(self):
        values = mmse(BG, np.geomspace(1e-3, 1e5, 200))
        self.assertTrue(np.all(np.diff(values) < 0))

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(9)
        s = 20.0
        x = BG.sample(rng, 1_000_000)
        u = x + rng.normal(size=x.size) / math.sqrt(s)
        empirical = np.mean((x - denoise(BG, u, 1 / s)) ** 2)
        self.assertLess(abs(empirical / mmse(BG, s) - 1), 0.02)

    def test_high_order_reference(self):
        with override_settings(AMPLAB={"GH_ORDER": 201}):
            reference = mmse(BG, 30.0)
        self.assertAlmostEqual(mmse(BG, 30.0), reference, places=10)


class MutualInformationTests(SimpleTestCase):
    """Test mutual information and its table."""

    def test_gaussian_closed_form(self):
        self.assertLess(abs(mutual_info(GAUSS, 3.0) / (0.5 * math.log(4.0)) - 1), 1e-6)

    def test_zero(self):
        self.assertEqual(mutual_info(BG, 0.0), 0.0)

    def test_monotone(self):
        values = [mutual_info(BG, s) for s in np.linspace(0, 100, 21)]
        self.assertTrue(np.all(np.diff(values) >= 0))

    def test_derivative_is_half_mmse(self):
        s, h = 5.0, 1e-3
        numeric = (mutual_info(BG, s + h) - mutual_info(BG, s - h)) / (2 * h)
        self.assertAlmostEqual(numeric, 0.5 * mmse(BG, s), delta=1e-5)

    def test_table_matches_quadrature(self):
        table = information_table(BG, 1e4)
        for s in (1e-5, 0.3, 7.0, 250.0, 1e4):
            self.assertAlmostEqual(table(s), mutual_info(BG, s), delta=1e-7)

    def test_table_beyond_range(self):
        table = information_table(GAUSS, 10.0)
        self.assertAlmostEqual(table(20.0), 0.5 * math.log(21.0), places=7)


class ErrorCovarianceTests(SimpleTestCase):
    """Test the joint error covariance of two denoised observations."""

    def test_gaussian_closed_form(self):
        v1, v2, cov = 1.0, 0.5, 0.3
        c1, c2 = 1 / (1 + v1), 1 / (1 + v2)
        self.assertAlmostEqual(
            error_covariance(GAUSS, v1, v2, cov), 1 - c1 - c2 + c1 * c2 * (1 + cov), places=12
        )

    def test_nested_shortcut_matches_quadrature(self):
        prior = Prior.bernoulli_gaussian(0.5)
        nested = error_covariance(prior, 1.0, 0.8, 0.8)
        generic = error_covariance(prior, 1.0, 0.8, 0.8, exact_nested=False)
        self.assertAlmostEqual(nested, mmse(prior, 1 / 0.8), places=12)
        self.assertAlmostEqual(generic, nested, delta=1e-4)

    def test_equal_observations_give_mmse(self):
        prior = Prior.bernoulli_gaussian(0.5)
        self.assertAlmostEqual(
            error_covariance(prior, 0.5, 0.5, 0.5, exact_nested=False), mmse(prior, 2.0), delta=1e-4
        )
