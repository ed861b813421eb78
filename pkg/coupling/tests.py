"""
Tests for base matrices, section operators and coupled systems.
"""

import numpy as np
from django.test import SimpleTestCase
from scipy.linalg import hadamard

from core.exceptions import ConfigError, DimError
from coupling.base import BaseMatrix, gamma_projector, initial_variance, uniform_base
from coupling.sections import (
    DCT,
    HAAR,
    HADAMARD,
    TransformSection,
    fwht,
    geometric_singular_values,
    orthogonal_section,
    row_orthogonal_singular_values,
)
from coupling.system import build_system, snr_db_to_sigma2
from denoiser.priors import Prior
from spectra.transforms import Spectrum


class BaseMatrixTests(SimpleTestCase):
    """Test base matrices and their windows."""

    def test_uniform_base_weights(self):
        base = uniform_base(4, 1)
        self.assertEqual(base.gamma.shape, (5, 4))
        self.assertAlmostEqual(base.weight(1, 0), 1.0 / np.sqrt(2.0))
        self.assertEqual(base.weight(3, 0), 0.0)
        self.assertAlmostEqual(np.sum(base.gamma**2) / base.L, 1.0)

    def test_width_not_smaller_than_length_rejected(self):
        with self.assertRaises(DimError):
            uniform_base(2, 2)

    def test_unnormalized_gamma_rejected(self):
        with self.assertRaises(DimError):
            BaseMatrix(L=2, W=0, gamma=2.0 * np.eye(2))

    def test_gamma_outside_band_rejected(self):
        gamma = np.full((3, 2), 1.0 / np.sqrt(2.0))
        with self.assertRaises(DimError):
            BaseMatrix(L=2, W=1, gamma=gamma)

    def test_windows(self):
        base = uniform_base(4, 1)
        self.assertEqual(base.window(0), (0, 0))
        self.assertEqual(base.window(2), (0, 1))
        self.assertEqual(base.window(4), (1, 1))
        self.assertEqual(list(base.widths()), [1, 2, 2, 2, 1])

    def test_row_outside_range(self):
        with self.assertRaises(IndexError):
            uniform_base(4, 1).window(5)

    def test_initial_variance(self):
        self.assertAlmostEqual(initial_variance(uniform_base(3, 0), 1, 16), 1.0)
        self.assertAlmostEqual(initial_variance(uniform_base(6, 2), 3, 16), 1.0)
        self.assertAlmostEqual(initial_variance(uniform_base(6, 2), 0, 16), 1.0 / 3.0)


class GammaProjectorTests(SimpleTestCase):
    """Test the section stacking operator."""

    def test_block_layout(self):
        base = uniform_base(4, 1)
        projector = gamma_projector(base, 2, 3)
        x = np.arange(12.0)
        out = projector.apply(x)
        weight = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(out[:3], weight * x[3:6])
        np.testing.assert_allclose(out[3:], weight * x[6:9])
        self.assertEqual(projector.block_of(1), slice(0, 3))

    def test_adjoint(self):
        rng = np.random.default_rng(3)
        base = uniform_base(5, 2)
        for ell in range(base.rows):
            projector = gamma_projector(base, ell, 4)
            x = rng.normal(size=20)
            u = rng.normal(size=projector.size)
            self.assertAlmostEqual(projector.apply(x) @ u, x @ projector.adjoint(u))

    def test_unknown_offset(self):
        projector = gamma_projector(uniform_base(4, 1), 0, 2)
        with self.assertRaises(IndexError):
            projector.block_of(1)


class SectionOperatorTests(SimpleTestCase):
    """Test transform-based and dense section operators."""

    def test_fwht_matches_hadamard_matrix(self):
        x = np.random.default_rng(0).normal(size=16)
        np.testing.assert_allclose(fwht(x), hadamard(16) @ x, atol=1e-12)

    def test_fwht_needs_power_of_two(self):
        with self.assertRaises(DimError):
            fwht(np.ones(12))

    def test_full_transforms_are_orthogonal(self):
        for basis in (HADAMARD, DCT):
            section = TransformSection(np.ones(8), np.arange(8), 8, basis)
            dense = section.dense()
            np.testing.assert_allclose(dense @ dense.T, np.eye(8), atol=1e-12)

    def test_row_orthogonal_sections(self):
        rng = np.random.default_rng(5)
        for basis in (HADAMARD, DCT, HAAR):
            values = row_orthogonal_singular_values(4, 16)
            dense = orthogonal_section(values, 16, basis, rng).dense()
            np.testing.assert_allclose(dense @ dense.T, 4.0 * np.eye(4), atol=1e-10)

    def test_adjoint_consistency(self):
        rng = np.random.default_rng(6)
        section = orthogonal_section(geometric_singular_values(5, 16, 10.0), 16, DCT, rng)
        x, r = rng.normal(size=16), rng.normal(size=5)
        self.assertAlmostEqual(section.matvec(x) @ r, x @ section.rmatvec(r))

    def test_geometric_singular_values(self):
        values = geometric_singular_values(6, 20, 100.0)
        np.testing.assert_allclose(values[1:] / values[:-1], 100.0 ** (-1.0 / 5.0))
        self.assertAlmostEqual(values[0] / values[-1], 100.0)
        self.assertAlmostEqual(np.sum(values**2), 20.0)

    def test_unknown_basis(self):
        with self.assertRaises(ConfigError):
            orthogonal_section(np.ones(2), 4, "wavelet", np.random.default_rng(0))


class CoupledSystemTests(SimpleTestCase):
    """Test drawing coupled measurement systems."""

    prior = Prior.bernoulli_gaussian(0.1)

    def build(self, seed, ensemble=None, basis=HADAMARD):
        ensemble = ensemble or Spectrum.geometric(0.25, 10.0)
        return build_system(uniform_base(4, 1), 32, 8, ensemble, self.prior, 1e-3, seed, basis)

    def test_snr_conversion(self):
        self.assertAlmostEqual(snr_db_to_sigma2(30.0), 1e-3)

    def test_same_seed_same_system(self):
        first, second = self.build(42), self.build(42)
        np.testing.assert_array_equal(first.x, second.x)
        for a, b in zip(first.y, second.y):
            np.testing.assert_array_equal(a, b)

    def test_different_seed_different_system(self):
        self.assertFalse(np.array_equal(self.build(1).x, self.build(2).x))

    def test_measurements(self):
        system = self.build(7, basis=DCT)
        self.assertEqual(len(system.y), 5)
        for section, y, n in zip(system.sections, system.y, system.noise):
            dense = section.operator.dense()
            np.testing.assert_allclose(y - n, dense @ section.signal(system.x), atol=1e-10)

    def test_extract_undoes_stacking(self):
        system = self.build(9)
        section = system.sections[2]
        x_vec = section.signal(system.x)
        for w in range(section.w_min, section.w_max + 1):
            expected = system.base.weight(2, 2 - w) * system.column(2 - w)
            np.testing.assert_allclose(section.extract(x_vec, w), expected)

    def test_section_spectrum(self):
        system = self.build(3, ensemble=Spectrum.iid_gaussian(0.25))
        self.assertAlmostEqual(system.section_spectrum(2).delta, 0.125)
        self.assertAlmostEqual(system.section_spectrum(0).delta, 0.25)

    def test_rescaled_sections_have_unit_power(self):
        system = self.build(4, ensemble=Spectrum.row_orthogonal(0.25))
        for section in system.sections:
            values = section.singular_values**2 * section.width
            self.assertAlmostEqual(np.sum(values) / section.Nc, 1.0)

    def test_empirical_ensemble_rejected(self):
        with self.assertRaises(ConfigError):
            self.build(0, ensemble=Spectrum.empirical([2.0, 0.0], 2))

    def test_too_many_rows_rejected(self):
        with self.assertRaises(DimError):
            build_system(
                uniform_base(2, 0), 4, 8, Spectrum.iid_gaussian(0.5), self.prior, 1e-3, 0
            )
