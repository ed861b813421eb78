"""
Tests for the potential function and the threshold searches.
"""

from django.test import SimpleTestCase, tag
from scipy import optimize

from core.exceptions import DegenerateBracket, DomainError
from coupling.base import uniform_base
from coupling.system import snr_db_to_sigma2
from denoiser.priors import Prior
from evolution.recursions import BAYES, CoupledModel, run_se
from potential.landscape import (
    DENSE_FLOOR,
    ThresholdResult,
    bisect_threshold,
    bp_threshold,
    coupled_threshold,
    optimality_gap,
    potential_curve,
    potential_threshold,
    r_family,
    rs_potential,
)
from spectra.rtransform import limit_r_transform
from spectra.transforms import GEOMETRIC, IID_GAUSSIAN, Spectrum

BG = Prior.bernoulli_gaussian(0.1)
GAUSS = Prior.gaussian()


def iid_limit(delta):
    return limit_r_transform(Spectrum.iid_gaussian(delta))


class RsPotentialTests(SimpleTestCase):
    """Test the replica-symmetric potential and the curve built from it."""

    def test_origin(self):
        self.assertEqual(rs_potential(BG, iid_limit(0.3), 1e-3, 0.0, 0.0), 0.0)

    def test_out_of_range_arguments(self):
        with self.assertRaises(DomainError):
            rs_potential(BG, iid_limit(0.3), 1e-3, 1.5, 1.0)
        with self.assertRaises(DomainError):
            rs_potential(BG, iid_limit(0.3), 1e-3, 0.5, -1.0)

    def test_half_potential_along_the_sinr_curve(self):
        R, sigma2 = iid_limit(0.3), 1e-3
        curve = potential_curve(BG, R, sigma2, grid_n=512)
        self.assertEqual(curve.E_grid.shape, (512,))
        for E, F in zip(curve.E_grid[::16], curve.F_values[::16]):
            s = float(curve.sinr(E))
            value = rs_potential(BG, R, sigma2, float(E), s, information=curve.information)
            self.assertAlmostEqual(value, F / 2.0, delta=1e-8)
            self.assertAlmostEqual(curve.potential(float(E)), F, delta=1e-8)

    def test_minimizers_are_stationary(self):
        curve = potential_curve(BG, iid_limit(0.18), 1e-3, grid_n=512)
        self.assertTrue(curve.minimizers)
        for minimizer in curve.minimizers:
            self.assertLess(minimizer.residual, 1e-8)

    def test_gaussian_prior_has_one_minimizer(self):
        delta, sigma2 = 0.4, 1e-2
        curve = potential_curve(GAUSS, iid_limit(delta), sigma2, grid_n=256)

        def drift(E):
            return E - 1.0 / (1.0 + delta / (delta * sigma2 + E))

        self.assertTrue(curve.unique)
        self.assertTrue(curve.optimal_is_smallest)
        self.assertAlmostEqual(curve.E_opt, optimize.brentq(drift, 0.0, 1.0, xtol=1e-15), delta=1e-10)

    def test_small_grid_rejected(self):
        with self.assertRaises(DomainError):
            potential_curve(BG, iid_limit(0.3), 1e-3, grid_n=8)

    def test_summary(self):
        data = potential_curve(BG, iid_limit(0.3), 1e-3, grid_n=128).to_dict()
        self.assertEqual(data["delta"], 0.3)
        self.assertGreaterEqual(data["ties"], 1)
        self.assertIn(data["E_opt"], [m["E"] for m in data["minimizers"]])


class OptimalityTests(SimpleTestCase):
    """Test the global minimizer as the noise vanishes."""

    def test_sparse_prior_above_the_information_dimension(self):
        curve = potential_curve(BG, iid_limit(0.3), 1e-6, grid_n=1024)
        self.assertLess(curve.E_opt, 1e-3)

    def test_sparse_prior_below_the_information_dimension(self):
        curve = potential_curve(BG, iid_limit(0.05), 1e-6, grid_n=1024)
        self.assertGreater(curve.E_opt, 0.1)

    def test_trend_across_noise_levels(self):
        points = optimality_gap(BG, iid_limit(0.3), [1e-6, 1e-2, 1e-4], grid_n=512)
        self.assertEqual([p.sigma2 for p in points], [1e-2, 1e-4, 1e-6])
        energies = [p.E_opt for p in points]
        self.assertTrue(all(a > b for a, b in zip(energies, energies[1:])))
        self.assertGreater(points[-1].scaled_sinr, 0.1)

    def test_gaussian_prior_stays_away_from_zero(self):
        points = optimality_gap(GAUSS, iid_limit(0.5), [1e-2, 1e-4, 1e-6], grid_n=256)
        for point in points:
            self.assertGreater(point.E_opt, 0.4)

    def test_coupled_recursion_below_the_optimal_energy(self):
        delta, sigma2 = 0.4, snr_db_to_sigma2(30.0)
        spectrum = Spectrum.iid_gaussian(delta)
        curve = potential_curve(BG, limit_r_transform(spectrum), sigma2, grid_n=512)
        self.assertTrue(curve.unique)
        result = run_se(CoupledModel(uniform_base(8, 1), spectrum, BG, sigma2), BAYES)
        self.assertTrue(result.converged)
        self.assertLessEqual(result.average_mse, curve.E_opt + 1e-4)


class BisectThresholdTests(SimpleTestCase):
    """Test the bracketed search on synthetic properties."""

    def test_step_property(self):
        result = bisect_threshold(lambda d: d > 0.37, 0.1, 0.9, tol=1e-4)
        self.assertGreater(result.delta, 0.37)
        self.assertLessEqual(result.delta, 0.37 + 1e-4)
        self.assertTrue(result.monotone)
        self.assertFalse(result.at_floor)

    def test_failing_upper_end(self):
        with self.assertRaises(DegenerateBracket):
            bisect_threshold(lambda d: False, 0.1, 0.9)

    def test_invalid_brackets(self):
        with self.assertRaises(DegenerateBracket):
            bisect_threshold(lambda d: True, 0.5, 0.5)
        with self.assertRaises(DegenerateBracket):
            bisect_threshold(lambda d: True, 0.5, 1.5)

    def test_property_holding_everywhere(self):
        result = bisect_threshold(lambda d: True, 0.2, 0.9)
        self.assertTrue(result.at_floor)
        self.assertEqual(result.delta, 0.2)

    def test_non_monotone_property_is_flagged(self):
        result = bisect_threshold(lambda d: d > 0.75 or abs(d - 0.3) < 0.01, 0.1, 0.9, tol=1e-4)
        self.assertFalse(result.monotone)
        self.assertGreater(result.delta, 0.75)
        self.assertLessEqual(result.delta, 0.75 + 1e-4)

    def test_summary(self):
        data = ThresholdResult(delta=0.25, bracket=(0.1, 1.0), rate_adjusted=0.3).to_dict()
        self.assertEqual(
            data,
            {
                "delta": 0.25,
                "bracket": [0.1, 1.0],
                "at_floor": False,
                "monotone": True,
                "evaluations": 0,
                "rate_adjusted": 0.3,
            },
        )


class ThresholdTests(SimpleTestCase):
    """Test the BP, potential and coupled thresholds."""

    def test_potential_threshold_below_bp_threshold(self):
        family = r_family(IID_GAUSSIAN)
        bracket = (0.12, 0.5)
        bp = bp_threshold(BG, family, 1e-3, bracket, tol=1e-3, grid_n=256)
        opt = potential_threshold(BG, family, 1e-3, bracket, tol=1e-3, grid_n=256)
        self.assertLessEqual(opt.delta, bp.delta)
        self.assertLess(bp.delta, 0.5)

    def test_gaussian_bp_threshold_at_the_floor(self):
        result = bp_threshold(GAUSS, r_family(IID_GAUSSIAN), 1e-2, tol=1e-2, grid_n=128)
        self.assertTrue(result.at_floor)
        self.assertEqual(result.delta, DENSE_FLOOR)

    def test_coupling_lowers_the_threshold(self):
        sigma2 = snr_db_to_sigma2(30.0)
        uncoupled = coupled_threshold(BG, IID_GAUSSIAN, sigma2, 10, 0, bracket=(0.12, 0.35), tol=1e-3)
        coupled = coupled_threshold(BG, IID_GAUSSIAN, sigma2, 10, 1, bracket=(0.12, 0.35), tol=1e-3)
        self.assertLess(coupled.delta, uncoupled.delta)
        self.assertAlmostEqual(coupled.rate_adjusted, 1.1 * coupled.delta)
        self.assertEqual(uncoupled.rate_adjusted, uncoupled.delta)


@tag("slow")
class LongChainThresholdTests(SimpleTestCase):
    """Test coupled thresholds of a long chain, L=50 at 30 dB."""

    sigma2 = snr_db_to_sigma2(30.0)
    search = {"bracket": (0.12, 0.35), "tol": 5e-4, "T": 1000}

    def test_unit_condition_number_matches_iid_gaussian(self):
        iid = coupled_threshold(BG, IID_GAUSSIAN, self.sigma2, 50, 1, **self.search)
        unit = coupled_threshold(BG, GEOMETRIC, self.sigma2, 50, 1, kappa=1.0, **self.search)
        self.assertLess(abs(unit.delta - iid.delta), 2e-3)

    def test_rate_loss_dominates_for_wide_coupling(self):
        narrow = coupled_threshold(BG, IID_GAUSSIAN, self.sigma2, 50, 1, **self.search)
        wide = coupled_threshold(BG, IID_GAUSSIAN, self.sigma2, 50, 16, **self.search)
        self.assertLessEqual(wide.delta, narrow.delta + self.search["tol"])
        self.assertGreater(wide.rate_adjusted, narrow.rate_adjusted)
