import math

import numpy as np
from numpy.testing import assert_allclose
from django.test import SimpleTestCase

from fronthaul.services.compression import (
    EcAllocation, VcAllocation, achieved_rate, build_whitener, compression_objective,
    ec_waterfill, vc_waterfill, waterfill,
)
from fronthaul.services.errors import ContractViolation


def random_channel(rng, N, K, scale=1.0):
    return scale * (rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))) / np.sqrt(2.0)


def grid_level(gains, C_s, points=200_001):
    # bracketing grid cell of the water level by direct evaluation of the rate
    log2_gains = np.log2(gains[gains > 0])
    top = log2_gains.max()
    xs = np.linspace(-top, C_s - top + 1.0, points)
    rates = np.maximum(0.0, log2_gains[:, None] + xs[None, :]).sum(axis=0)
    idx = int(np.searchsorted(rates, C_s))
    return xs[idx - 1], xs[idx]


class VcWaterfillTests(SimpleTestCase):
    def test_single_direction_closed_form(self):
        alloc = vc_waterfill(np.array([[np.sqrt(3.0)]]), 1.0, 1.0, 2.0)
        assert_allclose(alloc.lambda_q, [0.75], rtol=1e-6)
        self.assertAlmostEqual(alloc.mu, 3.0 / 7.0, places=6)
        self.assertAlmostEqual(achieved_rate(alloc, np.array([[np.sqrt(3.0)]]), 1.0, 1.0), 2.0, places=6)

    def test_zero_budget(self):
        alloc = vc_waterfill(random_channel(np.random.default_rng(0), 3, 2), 1.0, 1.0, 0.0)
        assert_allclose(alloc.lambda_q, 0.0)
        self.assertEqual(alloc.achieved_bits, 0.0)

    def test_zero_channel_cannot_spend_bits(self):
        with self.assertLogs('fronthaul.services.compression', 'WARNING'):
            alloc = vc_waterfill(np.zeros((2, 2)), 1.0, 1.0, 5.0)
        self.assertTrue(alloc.rate_unreachable)
        assert_allclose(alloc.lambda_q, 0.0)

    def test_unlimited(self):
        alloc = vc_waterfill(random_channel(np.random.default_rng(1), 2, 2), 1.0, 1.0, None)
        self.assertTrue(alloc.unlimited)
        self.assertIsNone(alloc.lambda_q)
        self.assertEqual(achieved_rate(alloc, np.zeros((2, 2)), 1.0, 1.0), math.inf)

    def test_matches_grid_scan(self):
        # p * lambda_h2 = {3, 1}, sigma2 = 1
        H = np.diag([np.sqrt(3.0), 1.0]).astype(complex)
        alloc = vc_waterfill(H, 1.0, 1.0, 3.0)
        log2_gains = np.log2([3.0, 1.0])
        xs = np.linspace(-np.log2(3.0), 3.0 - np.log2(3.0), 1_000_000)
        rates = np.maximum(0.0, log2_gains[:, None] + xs[None, :]).sum(axis=0)
        idx = int(np.searchsorted(rates, 3.0))
        self.assertTrue(xs[idx - 1] - 1e-7 <= alloc.water_level <= xs[idx] + 1e-7)
        self.assertAlmostEqual(alloc.achieved_bits, 3.0, delta=1e-6)

    def test_random_grid_scan(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            N, K = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            H = random_channel(rng, N, K, scale=10 ** rng.uniform(-1, 1))
            C_s = float(rng.uniform(0.5, 30.0))
            alloc = vc_waterfill(H, 1.0, 0.5, C_s)
            lo, hi = grid_level(alloc.lambda_h2 / 0.5, C_s)
            self.assertTrue(lo - 1e-7 <= alloc.water_level <= hi + 1e-7)
            self.assertAlmostEqual(alloc.achieved_bits, C_s, delta=1e-6)

    def test_single_antenna_budgets_are_met(self):
        rng = np.random.default_rng(10)
        for _ in range(5000):
            H = random_channel(rng, 1, int(rng.integers(1, 9)), scale=10 ** rng.uniform(-2, 2))
            C_s = float(rng.uniform(0.01, 64.0))
            alloc = vc_waterfill(H, 1.0, float(rng.uniform(0.1, 2.0)), C_s)
            self.assertEqual(alloc.achieved_bits, C_s)
            self.assertAlmostEqual(float(alloc.bits.sum()), C_s, delta=1e-9)

    def test_one_user_is_one_direction(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            H = random_channel(rng, int(rng.integers(2, 9)), 1)
            C_s = float(rng.uniform(0.01, 64.0))
            alloc = vc_waterfill(H, 1.0, 1.0, C_s)
            self.assertEqual(int(np.count_nonzero(alloc.bits)), 1)
            self.assertAlmostEqual(achieved_rate(alloc, H, 1.0, 1.0), C_s, delta=1e-6)

    def test_random_instances_hit_budget_and_kkt(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            N, K = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            p, sigma2 = 1.0, float(rng.uniform(0.1, 2.0))
            H = random_channel(rng, N, K, scale=10 ** rng.uniform(-1, 1))
            C_s = float(rng.uniform(0.1, 40.0))
            alloc = vc_waterfill(H, p, sigma2, C_s)
            self.assertAlmostEqual(achieved_rate(alloc, H, p, sigma2), C_s, delta=1e-6)
            c = p * alloc.lambda_h2 + sigma2
            expected = np.maximum(0.0, (1.0 / alloc.mu) * (1.0 / sigma2 - 1.0 / c) - 1.0 / sigma2)
            assert_allclose(alloc.lambda_q, expected, rtol=1e-9, atol=1e-9)

    def test_objective_nondecreasing_in_budget(self):
        rng = np.random.default_rng(3)
        H = random_channel(rng, 4, 3)
        values = [compression_objective(vc_waterfill(H, 1.0, 0.5, c), H, 1.0, 0.5) for c in np.linspace(0, 30, 31)]
        self.assertTrue(all(b >= a - 1e-9 for a, b in zip(values, values[1:])))


class EcWaterfillTests(SimpleTestCase):
    def test_single_element_closed_form(self):
        alloc = ec_waterfill(np.array([[np.sqrt(3.0)]]), 1.0, 1.0, 2.0)
        self.assertAlmostEqual(1.0 / alloc.inv_sigma2_e[0], 4.0 / 3.0, places=6)
        self.assertAlmostEqual(alloc.bits_per_element[0], 2.0, places=6)

    def test_zero_budget(self):
        alloc = ec_waterfill(random_channel(np.random.default_rng(4), 3, 2), 1.0, 1.0, 0.0)
        assert_allclose(alloc.inv_sigma2_e, 0.0)

    def test_equal_rows_share_bits_equally(self):
        H = np.ones((4, 2), dtype=complex)
        alloc = ec_waterfill(H, 1.0, 1.0, 10.0)
        assert_allclose(alloc.bits_per_element, 2.5, atol=1e-6)

    def test_random_grid_scan(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            N, K = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            H = random_channel(rng, N, K, scale=10 ** rng.uniform(-1, 1))
            C_s = float(rng.uniform(0.5, 30.0))
            alloc = ec_waterfill(H, 1.0, 0.5, C_s)
            lo, hi = grid_level(alloc.W_diag / 0.5, C_s)
            self.assertTrue(lo - 1e-7 <= alloc.water_level <= hi + 1e-7)
            self.assertAlmostEqual(alloc.achieved_bits, C_s, delta=1e-6)

    def test_single_antenna_budgets_are_met(self):
        rng = np.random.default_rng(13)
        for _ in range(5000):
            H = random_channel(rng, 1, int(rng.integers(1, 9)), scale=10 ** rng.uniform(-2, 2))
            C_s = float(rng.uniform(0.01, 64.0))
            alloc = ec_waterfill(H, 1.0, float(rng.uniform(0.1, 2.0)), C_s)
            self.assertAlmostEqual(alloc.achieved_bits, C_s, delta=1e-9)

    def test_random_instances_hit_budget_and_kkt(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            N, K = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            p, sigma2 = 1.0, float(rng.uniform(0.1, 2.0))
            H = random_channel(rng, N, K, scale=10 ** rng.uniform(-1, 1))
            C_s = float(rng.uniform(0.1, 40.0))
            alloc = ec_waterfill(H, p, sigma2, C_s)
            self.assertAlmostEqual(achieved_rate(alloc, H, p, sigma2), C_s, delta=1e-6)
            expected = np.maximum(0.0, (1.0 / alloc.mu) * (1.0 / sigma2 - 1.0 / alloc.P_diag) - 1.0 / sigma2)
            assert_allclose(alloc.inv_sigma2_e, expected, rtol=1e-9, atol=1e-9)

    def test_objective_nondecreasing_in_budget(self):
        H = random_channel(np.random.default_rng(6), 4, 3)
        values = [compression_objective(ec_waterfill(H, 1.0, 0.5, c), H, 1.0, 0.5) for c in np.linspace(0, 30, 31)]
        self.assertTrue(all(b >= a - 1e-9 for a, b in zip(values, values[1:])))

    def test_single_antenna_matches_vc(self):
        H = random_channel(np.random.default_rng(7), 1, 3)
        vc = build_whitener(vc_waterfill(H, 1.0, 1.0, 3.0), 1.0)
        ec = build_whitener(ec_waterfill(H, 1.0, 1.0, 3.0), 1.0)
        assert_allclose(vc.zinv_eigs, ec.zinv_eigs, rtol=1e-9)


class WhitenerTests(SimpleTestCase):
    def test_vc_example_eigenvalue(self):
        whitener = build_whitener(vc_waterfill(np.array([[np.sqrt(3.0)]]), 1.0, 1.0, 2.0), 1.0)
        assert_allclose(whitener.zinv_eigs, [3.0 / 7.0], rtol=1e-6)

    def test_discarded_direction(self):
        whitener = build_whitener(vc_waterfill(np.eye(2, dtype=complex), 1.0, 1.0, 0.0), 1.0)
        assert_allclose(whitener.zinv_eigs, 0.0)
        self.assertFalse(whitener.kept.any())

    def test_uncompressed_is_receiver_noise(self):
        whitener = build_whitener(None, 0.25, N=3)
        assert_allclose(whitener.zinv_eigs, 4.0)
        assert_allclose(whitener.zinv_matrix(), 4.0 * np.eye(3))
        x = np.array([1.0, 2.0, 3.0])
        assert_allclose(whitener.whiten(x), 2.0 * x)

    def test_large_budget_approaches_lossless(self):
        H = random_channel(np.random.default_rng(8), 2, 2)
        whitener = build_whitener(vc_waterfill(H, 1.0, 1.0, 200.0), 1.0)
        assert_allclose(whitener.zinv_eigs, 1.0, rtol=1e-6)

    def test_uncompressed_needs_dimension(self):
        with self.assertRaises(ContractViolation):
            build_whitener(None, 1.0)

    def test_waterfill_dispatch(self):
        H = np.eye(2, dtype=complex)
        self.assertIsInstance(waterfill('vc', H, 1.0, 1.0, 2.0), VcAllocation)
        self.assertIsInstance(waterfill('ec', H, 1.0, 1.0, 2.0), EcAllocation)
        self.assertIsNone(waterfill('none', H, 1.0, 1.0, 2.0))
        with self.assertRaises(ContractViolation):
            waterfill('zip', H, 1.0, 1.0, 2.0)

    def test_negative_budget(self):
        with self.assertRaises(ContractViolation):
            vc_waterfill(np.eye(2), 1.0, 1.0, -1.0)


class LargeBudgetTests(SimpleTestCase):
    # 32 MB shared by two APs over 64 subcarriers leaves 131072 bits per stored vector at AP 2
    BUDGETS = (1e4, 3e4, 131072.0)

    def test_vc_whitener_is_finite_and_lossless(self):
        H = random_channel(np.random.default_rng(20), 64, 4)
        for C_s in self.BUDGETS:
            alloc = vc_waterfill(H, 1.0, 0.5, C_s)
            kept = alloc.bits > 0
            self.assertEqual(int(kept.sum()), 4)
            self.assertTrue(np.all(np.isfinite(alloc.lambda_q)))
            self.assertGreater(alloc.mu, 0.0)
            assert_allclose(alloc.zinv[kept], 2.0, rtol=1e-12)
            assert_allclose(alloc.zinv[~kept], 0.0)
            self.assertAlmostEqual(alloc.achieved_bits, C_s, delta=1e-6)
            self.assertAlmostEqual(achieved_rate(alloc, H, 1.0, 0.5), C_s, delta=1e-6)

    def test_ec_whitener_is_finite_and_lossless(self):
        H = random_channel(np.random.default_rng(21), 64, 4)
        for C_s in self.BUDGETS:
            alloc = ec_waterfill(H, 1.0, 0.5, C_s)
            self.assertTrue(np.all(np.isfinite(alloc.inv_sigma2_e)))
            self.assertTrue(np.all(np.isfinite(alloc.bits_per_element)))
            self.assertGreater(alloc.mu, 0.0)
            assert_allclose(build_whitener(alloc, 0.5).zinv_eigs, 2.0, rtol=1e-12)
            self.assertAlmostEqual(float(alloc.bits_per_element.sum()), C_s, delta=1e-6)
            self.assertAlmostEqual(achieved_rate(alloc, H, 1.0, 0.5), C_s, delta=1e-6)

    def test_single_antenna_large_budget(self):
        H = random_channel(np.random.default_rng(22), 1, 4)
        for fill in (vc_waterfill, ec_waterfill):
            alloc = fill(H, 1.0, 1.0, 131072.0)
            assert_allclose(build_whitener(alloc, 1.0).zinv_eigs, 1.0, rtol=1e-12)

    def test_objective_matches_uncompressed(self):
        H = random_channel(np.random.default_rng(23), 8, 4)
        vc = compression_objective(vc_waterfill(H, 1.0, 1.0, 50_000.0), H, 1.0, 1.0)
        self.assertAlmostEqual(vc, compression_objective(None, H, 1.0, 1.0), delta=1e-9)
        ec = compression_objective(ec_waterfill(H, 1.0, 1.0, 50_000.0), H, 1.0, 1.0)
        W = np.sum(np.abs(H) ** 2, axis=1)
        self.assertAlmostEqual(ec, float(np.sum(np.log2(1.0 + W))), delta=1e-9)
