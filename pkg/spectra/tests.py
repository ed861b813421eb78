"""
Tests for the eigenvalue laws and their transforms.
"""

import numpy as np
from django.test import SimpleTestCase, tag

from core.exceptions import ConfigError, DomainError
from spectra.rtransform import limit_r_transform, spectrum_r_transform
from spectra.transforms import (
    Spectrum,
    coupled_limit_r_transform,
    eta_transform,
    geometric_limit_integral,
    inverse_moment,
    moments,
    one_minus_eta,
    r_transform,
    r_transform_identities_check,
    spectral_mean,
    z_min,
)

CLOSED_FORM_SPECTRA = [
    Spectrum.iid_gaussian(0.5),
    Spectrum.iid_gaussian(1.0),
    Spectrum.row_orthogonal(0.5),
    Spectrum.row_orthogonal(1.0),
    Spectrum.geometric(0.5, 10.0),
    Spectrum.geometric(1.0, 10.0),
]


class SpectrumTests(SimpleTestCase):
    """Test construction and validation of spectra."""

    def test_invalid_delta_rejected(self):
        with self.assertRaises(DomainError):
            Spectrum.iid_gaussian(1.5)

    def test_unknown_kind_rejected(self):
        with self.assertRaises(ConfigError):
            Spectrum("toeplitz", delta=0.5)

    def test_empirical_unit_mean_required(self):
        with self.assertRaises(DomainError):
            Spectrum.empirical([3.0, 3.0], 2)

    def test_empirical_delta_is_rank_ratio(self):
        spec = Spectrum.empirical([2.0, 0.0], 2)
        self.assertEqual(spec.delta, 0.5)

    def test_geometric_with_unit_kappa_is_row_orthogonal(self):
        self.assertEqual(Spectrum.geometric(0.3, 1.0), Spectrum.row_orthogonal(0.3))

    def test_section_divides_delta(self):
        spec = Spectrum.geometric(0.6, 10.0).section(3)
        self.assertAlmostEqual(spec.delta, 0.2)
        self.assertEqual(spec.kappa, 10.0)

    def test_dict_round_trip(self):
        spec = Spectrum.geometric(0.5, 100.0)
        self.assertEqual(Spectrum.from_dict(spec.to_dict()), spec)


class EtaTransformTests(SimpleTestCase):
    """Test the eta-transform."""

    def test_identity_spectrum(self):
        spec = Spectrum.empirical(np.ones(8), 8)
        self.assertAlmostEqual(eta_transform(spec, 1.0), 0.5)

    def test_value_at_zero(self):
        for spec in CLOSED_FORM_SPECTRA:
            self.assertEqual(eta_transform(spec, 0.0), 1.0)

    def test_negative_argument_rejected(self):
        with self.assertRaises(DomainError):
            eta_transform(Spectrum.iid_gaussian(0.5), -1.0)

    def test_closed_forms_match_spectral_quadrature(self):
        for spec in CLOSED_FORM_SPECTRA:
            for z in (0.1, 2.0, 50.0):
                expected = spectral_mean(spec, lambda lam, z=z: 1.0 / (1.0 + z * lam))
                self.assertAlmostEqual(eta_transform(spec, z), expected, places=8)

    def test_iid_matches_monte_carlo_trace(self):
        rng = np.random.default_rng(11)
        m, n = 512, 1024
        a = rng.normal(scale=1.0 / np.sqrt(m), size=(m, n))
        lam = np.linalg.eigvalsh(a.T @ a)
        trace = np.mean(1.0 / (1.0 + 2.0 * lam))
        value = eta_transform(Spectrum.iid_gaussian(0.5), 2.0)
        self.assertLess(abs(value - trace) / trace, 0.02)

    def test_z_eta_strictly_increasing(self):
        grid = np.linspace(0.0, 20.0, 100)
        for spec in CLOSED_FORM_SPECTRA:
            values = grid * eta_transform(spec, grid)
            self.assertTrue(np.all(np.diff(values) > 0))

    def test_eta_in_unit_interval_and_nonincreasing(self):
        grid = np.linspace(0.0, 20.0, 100)
        for spec in CLOSED_FORM_SPECTRA:
            values = eta_transform(spec, grid)
            self.assertTrue(np.all(values > 0) and np.all(values <= 1))
            self.assertTrue(np.all(np.diff(values) <= 0))


class RTransformTests(SimpleTestCase):
    """Test the R-transform and its identities."""

    def test_iid_closed_form(self):
        self.assertAlmostEqual(
            r_transform(Spectrum.iid_gaussian(0.3), -1.0), 0.3 / 1.3, places=12
        )

    def test_value_at_zero_is_one(self):
        for spec in CLOSED_FORM_SPECTRA:
            self.assertAlmostEqual(r_transform(spec, 0.0), 1.0, places=12)

    def test_positive_argument_rejected(self):
        with self.assertRaises(DomainError):
            r_transform(Spectrum.iid_gaussian(0.5), 0.1)

    def test_below_z_min_rejected(self):
        spec = Spectrum.row_orthogonal(1.0)
        self.assertEqual(z_min(spec), -1.0)
        with self.assertRaises(DomainError):
            r_transform(spec, -1.5)

    def test_definition_holds_for_inverted_kinds(self):
        for spec in (Spectrum.geometric(0.5, 10.0), Spectrum.row_orthogonal(0.4)):
            for w in (0.05, 0.7, 9.0):
                eta = eta_transform(spec, w)
                r = r_transform(spec, -w * eta)
                self.assertAlmostEqual(1.0 / (1.0 + w * r), eta, places=10)

    def test_identities_for_closed_forms(self):
        for spec in (
            Spectrum.iid_gaussian(0.5),
            Spectrum.row_orthogonal(0.5),
            Spectrum.geometric(0.5, 10.0),
        ):
            report = r_transform_identities_check(spec)
            self.assertLess(report.r0_residual, 1e-4)
            self.assertLess(report.r_prime_residual, 1e-4)

    def test_iid_derivative_at_zero(self):
        report = r_transform_identities_check(Spectrum.iid_gaussian(0.5))
        self.assertAlmostEqual(report.r_prime, 2.0, delta=1e-4)

    def test_identity_spectrum_has_flat_r_transform(self):
        report = r_transform_identities_check(Spectrum.row_orthogonal(1.0))
        self.assertAlmostEqual(report.r_prime, 0.0, delta=1e-10)

    @tag("slow")
    def test_identities_for_empirical_spectrum(self):
        rng = np.random.default_rng(5)
        m, n = 2048, 4096
        spec = Spectrum.from_matrix(rng.normal(scale=1.0 / np.sqrt(m), size=(m, n)))
        report = r_transform_identities_check(spec)
        self.assertLess(report.r0_residual / report.mu1, 0.02)
        self.assertLess(report.r_prime_residual / (report.mu2 - report.mu1**2), 0.02)

    def test_large_argument_limit(self):
        for spec in (Spectrum.iid_gaussian(0.5), Spectrum.row_orthogonal(0.5)):
            z = 1e4
            self.assertLess(abs(z * r_transform(spec, -z) - spec.delta), 1e-2)

    def test_nonnegative_and_nondecreasing(self):
        grid = np.linspace(-5.0, 0.0, 40)
        for spec in (Spectrum.iid_gaussian(0.5), Spectrum.geometric(0.5, 10.0)):
            values = r_transform(spec, grid)
            self.assertTrue(np.all(values >= 0))
            self.assertTrue(np.all(np.diff(values) >= 0))

    def test_row_orthogonal_coupled_sections_approach_iid(self):
        delta = 0.5
        grid = np.linspace(-5.0, -0.25, 20)
        target = delta / (delta - grid)

        def err(width):
            section = Spectrum.row_orthogonal(delta).section(width + 1)
            return np.max(np.abs(r_transform(section, grid / (width + 1)) - target))

        for width in (4, 8, 16):
            ratio = err(2 * width) / err(width)
            self.assertTrue(0.4 <= ratio <= 0.6, ratio)


class CoupledLimitTests(SimpleTestCase):
    """Test the infinite-width limit of the coupled R-transform."""

    def test_geometric_closed_form(self):
        for kappa in (10.0, 100.0):
            spec = Spectrum.geometric(0.5, kappa)
            for z in np.linspace(-10.0, -0.01, 25):
                closed = coupled_limit_r_transform(spec, z)
                integral = geometric_limit_integral(spec, z)
                generic = float(one_minus_eta(spec, -z)) / (-z)
                self.assertLess(abs(closed - integral), 1e-3)
                self.assertLess(abs(closed - generic), 1e-3)

    def test_limit_at_zero(self):
        self.assertEqual(coupled_limit_r_transform(Spectrum.geometric(0.5, 10.0), 0.0), 1.0)

    def test_row_orthogonal_limit_is_iid(self):
        grid = np.linspace(-3.0, 0.0, 7)
        np.testing.assert_allclose(
            coupled_limit_r_transform(Spectrum.row_orthogonal(0.4), grid),
            r_transform(Spectrum.iid_gaussian(0.4), grid),
        )

    def test_integrals(self):
        for rt in (
            limit_r_transform(Spectrum.iid_gaussian(0.3)),
            limit_r_transform(Spectrum.geometric(0.5, 10.0)),
            spectrum_r_transform(Spectrum.row_orthogonal(0.5)),
        ):
            xs = np.geomspace(1e-3, 30.0, 200)
            cumulative = rt.cumulative_integral(xs)
            for index in (50, 120, 199):
                self.assertAlmostEqual(cumulative[index], rt.integral(xs[index]), places=8)


class MomentTests(SimpleTestCase):
    """Test spectral moments."""

    def test_empirical(self):
        self.assertEqual(moments(Spectrum.empirical([2.0, 0.0], 2), 2), [1.0, 2.0])

    def test_iid_second_moment(self):
        self.assertAlmostEqual(moments(Spectrum.iid_gaussian(0.25), 2)[1], 5.0)

    def test_row_orthogonal_second_moment(self):
        self.assertAlmostEqual(moments(Spectrum.row_orthogonal(0.25), 2)[1], 4.0)

    def test_unit_mean(self):
        for spec in CLOSED_FORM_SPECTRA:
            self.assertAlmostEqual(moments(spec, 1)[0], 1.0, places=12)

    def test_moments_match_quadrature(self):
        for spec in CLOSED_FORM_SPECTRA:
            for k, mu in enumerate(moments(spec, 3), start=1):
                self.assertAlmostEqual(
                    spectral_mean(spec, lambda lam, k=k: lam**k) / mu, 1.0, places=8
                )

    def test_iid_second_moment_matches_monte_carlo(self):
        rng = np.random.default_rng(3)
        m, n = 512, 1024
        a = rng.normal(scale=1.0 / np.sqrt(m), size=(m, n))
        mu2 = np.sum((a @ a.T) ** 2) / n
        self.assertLess(abs(mu2 / moments(Spectrum.iid_gaussian(0.5), 2)[1] - 1), 0.02)

    def test_inverse_moment_matches_quadrature(self):
        for spec in (
            Spectrum.iid_gaussian(0.5),
            Spectrum.row_orthogonal(0.5),
            Spectrum.geometric(0.5, 10.0),
        ):
            expected = spectral_mean(
                spec, lambda lam: np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
            )
            self.assertAlmostEqual(inverse_moment(spec) / expected, 1.0, places=6)
