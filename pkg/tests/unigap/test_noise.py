import math
import unittest

import numpy as np
from numpy.testing import assert_array_equal

from unigap.noise import (NO_NOISE, Specification, SpeckleConfig, corrupt, expected_noise_power, loss_from_psnr,
                          make_rng, mse, noise_variance, psnr, psnr_from_loss, sample_poisson, sample_speckle_field)

N_DRAWS = 10 ** 6


def mean_and_stderr(values):
    return values.mean(), values.std(ddof=1) / math.sqrt(values.size)


def variance_and_stderr(values):
    centered = values - values.mean()
    squares = centered * centered
    return squares.mean(), squares.std(ddof=1) / math.sqrt(values.size)


class TestSpecification(unittest.TestCase):
    def test_inactive_dimensions_report_no_noise(self):
        theta = Specification(sigma=0.1)
        self.assertEqual(theta.values, (0.1, NO_NOISE['alpha'], NO_NOISE['beta']))
        self.assertEqual(theta.active, (True, False, False))
        self.assertEqual(theta.active_names, ('sigma',))

    def test_noiseless(self):
        self.assertTrue(Specification().is_noiseless())
        self.assertTrue(Specification(sigma=0.0).is_noiseless())
        self.assertFalse(Specification(alpha=0.1).is_noiseless())
        self.assertFalse(Specification(beta=1.0).is_noiseless())

    def test_equality_includes_active_flags(self):
        self.assertEqual(Specification(0.1, 0.5), Specification(0.1, 0.5))
        self.assertNotEqual(Specification(0.1, None, 1.0), Specification(0.1))
        self.assertEqual(len({Specification(0.1, 0.5), Specification(0.1, 0.5)}), 1)

    def test_coordinates_of_inactive_dimension_raises(self):
        with self.assertRaises(ValueError):
            Specification(sigma=0.1).coordinates(['sigma', 'alpha'])

    def test_from_mapping(self):
        theta = Specification.from_mapping({'alpha': 2.0, 'beta': 4.0})
        self.assertEqual(theta.active_names, ('alpha', 'beta'))

    def test_invalid_values_raise(self):
        for kwargs in ({'sigma': -0.1}, {'alpha': 0.0}, {'beta': 0.5}, {'sigma': float('nan')},
                       {'alpha': float('inf')}):
            with self.assertRaises(ValueError):
                Specification(**kwargs)

    def test_speckle_bound(self):
        self.assertEqual(SpeckleConfig().B, 1024)
        with self.assertRaises(ValueError):
            SpeckleConfig(0.5)


class TestRandomStreams(unittest.TestCase):
    def test_same_keys_same_stream(self):
        a = make_rng(7, 'eval', 3, 17).random(5)
        b = make_rng(7, 'eval', 3, 17).random(5)
        assert_array_equal(a, b)

    def test_different_keys_different_stream(self):
        a = make_rng(7, 'eval', 3, 17).random(5)
        b = make_rng(7, 'eval', 3, 18).random(5)
        c = make_rng(7, 'design').random(5)
        self.assertFalse(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))

    def test_long_tags_with_common_prefix(self):
        for first, second in (('subspace', 'subspace-mc'), ('patches-a', 'patches-b'),
                              ('evaluation-stream', 'evaluation-streams')):
            a = make_rng(0, first).random(3)
            b = make_rng(0, second).random(3)
            self.assertFalse(np.array_equal(a, b), (first, second))


class TestSpeckleField(unittest.TestCase):
    def setUp(self):
        self.cfg = SpeckleConfig(1024)
        self.rng = make_rng(0, 'speckle')

    def test_mildest_speckle_has_unit_mean(self):
        field = sample_speckle_field(N_DRAWS, 1.0, self.cfg, self.rng)
        mean, stderr = mean_and_stderr(field)
        self.assertLess(abs(mean - 1.0), 3 * stderr)

    def test_developed_speckle_has_unit_variance(self):
        field = sample_speckle_field(N_DRAWS, 1024.0, self.cfg, self.rng)
        var, stderr = variance_and_stderr(field)
        self.assertLess(abs(var - 1.0), 3 * stderr)

    def test_variance_is_beta_over_B(self):
        field = sample_speckle_field(N_DRAWS, 32.0, self.cfg, self.rng)
        var, stderr = variance_and_stderr(field)
        self.assertLess(abs(var - 0.03125), 3 * stderr)

    def test_field_is_positive(self):
        field = sample_speckle_field(10000, 1024.0, self.cfg, self.rng)
        self.assertTrue(np.all(field > 0))

    def test_beta_outside_range_raises(self):
        with self.assertRaises(ValueError):
            sample_speckle_field(10, 2048.0, self.cfg, self.rng)
        with self.assertRaises(ValueError):
            sample_speckle_field(10, 0.5, self.cfg, self.rng)


class TestPoisson(unittest.TestCase):
    def test_large_rates_use_normal_approximation(self):
        rng = make_rng(0, 'poisson')
        draws = sample_poisson(np.full(100000, 1e5), rng)
        self.assertFalse(np.all(draws == np.round(draws)))
        self.assertAlmostEqual(draws.mean() / 1e5, 1.0, places=3)

    def test_negative_rate_raises(self):
        with self.assertRaises(ValueError):
            sample_poisson(np.array([-1.0]), make_rng(0))


class TestCorrupt(unittest.TestCase):
    def setUp(self):
        self.cfg = SpeckleConfig(1024)
        self.x = np.full((1000, 1000), 0.5)

    def check_moments(self, theta, seed):
        y = corrupt(self.x, theta, self.cfg, make_rng(seed, 'corrupt')).ravel()
        mean, mean_err = mean_and_stderr(y)
        var, var_err = variance_and_stderr(y)
        expected = noise_variance(0.5, theta, self.cfg)
        self.assertLess(abs(mean - 0.5), 3 * mean_err)
        self.assertLess(abs(var - expected), 3 * var_err)

    def test_all_inactive_is_identity(self):
        x = make_rng(1).random((40, 40))
        y = corrupt(x, Specification(), self.cfg, make_rng(2))
        assert_array_equal(x, y)

    def test_deterministic_under_seed(self):
        theta = Specification(0.1, 0.5, 32.0)
        a = corrupt(self.x[:40, :40], theta, self.cfg, make_rng(3))
        b = corrupt(self.x[:40, :40], theta, self.cfg, make_rng(3))
        assert_array_equal(a, b)

    def test_gaussian_moments(self):
        self.check_moments(Specification(sigma=0.2), 10)

    def test_poisson_moments(self):
        theta = Specification(sigma=0.0, alpha=0.1, beta=1.0)
        self.assertAlmostEqual(noise_variance(0.5, theta, self.cfg), 0.05 + 0.25 / 1024)
        self.check_moments(theta, 11)

    def test_speckle_moments(self):
        theta = Specification(beta=1024.0)
        self.assertAlmostEqual(noise_variance(0.5, theta, self.cfg), 0.25)
        self.check_moments(theta, 12)

    def test_joint_moments(self):
        self.check_moments(Specification(0.05, 0.2, 256.0), 13)

    def test_non_finite_input_raises(self):
        x = np.zeros((4, 4))
        x[0, 0] = np.nan
        with self.assertRaises(ValueError):
            corrupt(x, Specification(sigma=0.1), self.cfg, make_rng(0))

    def test_expected_noise_power(self):
        theta = Specification(0.1, 0.5, 512.0)
        self.assertAlmostEqual(expected_noise_power(theta, 0.4, 0.2, self.cfg), 0.01 + 0.2 + 0.1)


class TestPSNR(unittest.TestCase):
    def test_exact_estimate_is_infinite(self):
        x = np.ones((8, 8)) * 0.3
        self.assertEqual(psnr(x, x), math.inf)

    def test_constant_error(self):
        x = np.zeros((8, 8))
        self.assertAlmostEqual(psnr(x + 0.1, x), 20.0, places=12)

    def test_agrees_with_definition(self):
        rng = make_rng(5)
        a, b = rng.random((16, 16)), rng.random((16, 16))
        direct = 10 * math.log10(1.0 / np.mean((a - b) ** 2))
        self.assertLess(abs(psnr(a, b) - direct), 1e-12 * abs(direct))

    def test_shape_mismatch_raises(self):
        with self.assertRaises(ValueError):
            mse(np.zeros(3), np.zeros(4))

    def test_loss_from_psnr(self):
        self.assertAlmostEqual(loss_from_psnr(20.0), 0.01, places=15)
        self.assertEqual(loss_from_psnr(0.0), 1.0)
        self.assertAlmostEqual(loss_from_psnr(35.3) / 2.951e-4, 1.0, places=3)

    def test_loss_from_psnr_rejects_infinity(self):
        with self.assertRaises(ValueError):
            loss_from_psnr(math.inf)

    def test_psnr_from_loss_inverts(self):
        self.assertAlmostEqual(psnr_from_loss(loss_from_psnr(27.5)), 27.5, places=12)
        self.assertEqual(psnr_from_loss(0.0), math.inf)
        with self.assertRaises(ValueError):
            psnr_from_loss(-1.0)
