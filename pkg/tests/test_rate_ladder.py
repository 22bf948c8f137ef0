from __future__ import annotations

import math
import unittest

import numpy as np

from cvqkdadapt.rate_ladder import (
    LadderError,
    NuProfile,
    ProfileError,
    ProfileIncompleteError,
    RateIndex,
    RateLadder,
    default_profile,
    ladder_violations,
    nu_at,
    nu_from_snr_db,
    snr_db,
)


class TestRateIndex(unittest.TestCase):

    def test_order(self):
        order = [RateIndex.zero(), RateIndex.minimum(), RateIndex.at_level(0), RateIndex.at_level(1),
                 RateIndex.at_level(7), RateIndex.maximum()]
        self.assertEqual(sorted(reversed(order)), order)
        self.assertLess(RateIndex.at_level(7), RateIndex.maximum())

    def test_labels(self):
        self.assertEqual(RateIndex.zero().label, "zero")
        self.assertEqual(RateIndex.at_level(2).label, "L2")
        self.assertEqual(str(RateIndex.maximum()), "max")
        for label in ["zero", "min", "L0", "L12", "max"]:
            self.assertEqual(RateIndex.parse(label).label, label)
        self.assertRaises(ValueError, RateIndex.parse, "L")
        self.assertRaises(ValueError, RateIndex.parse, "top")
        self.assertRaises(ValueError, RateIndex.at_level, -1)


class TestRateLadder(unittest.TestCase):

    def setUp(self):
        self.ladder = RateLadder(0.5, [1.0, 1.5, 2.0], 2.5)

    def test_positions(self):
        self.assertEqual(self.ladder.r, 3)
        self.assertEqual(self.ladder.n_positions(), 6)
        indices = self.ladder.indices()
        self.assertEqual([i.label for i in indices], ["zero", "min", "L0", "L1", "L2", "max"])
        for p, idx in enumerate(indices):
            self.assertEqual(self.ladder.position(idx), p)
            self.assertEqual(self.ladder.index_at(p), idx)
        self.assertRaises(ValueError, self.ladder.index_at, 6)

    def test_next_index(self):
        self.assertEqual(self.ladder.next_index(RateIndex.zero()), RateIndex.minimum())
        self.assertEqual(self.ladder.next_index(RateIndex.at_level(2)), RateIndex.maximum())
        self.assertRaises(ValueError, self.ladder.next_index, RateIndex.maximum())

    def test_rates(self):
        self.assertTrue(np.array_equal(self.ladder.rates(), [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]))
        self.assertEqual(self.ladder.rate(RateIndex.at_level(1)), 1.5)
        self.assertEqual(self.ladder.rate(RateIndex.minimum()), 0.5)
        self.assertEqual(self.ladder.rate(RateIndex.maximum()), 2.5)
        self.assertEqual(list(self.ladder.table().columns), ["RATE_INDEX", "RATE"])

    def test_level_outside_ladder(self):
        self.assertRaises(ProfileIncompleteError, self.ladder.position, RateIndex.at_level(3))

    def test_ordering_violation(self):
        with self.assertRaises(LadderError) as cm:
            RateLadder(0.5, [0.4, 1.0], 2.0)
        self.assertIn("ordering", str(cm.exception))
        self.assertRaises(LadderError, RateLadder, 0.5, [1.0, 1.0], 2.0)
        self.assertRaises(LadderError, RateLadder, 0.5, [1.0], 1.0)
        self.assertRaises(LadderError, RateLadder, 0.5, [], 1.0)
        self.assertRaises(LadderError, RateLadder, -0.5, [1.0], 2.0)

    def test_capacity(self):
        RateLadder(0.5, [1.0], 2.0, capacity=2.0)
        self.assertRaises(LadderError, RateLadder, 0.5, [1.0], 2.0, 1.9)
        self.assertEqual(ladder_violations(0.5, [1.0], 2.0), [])
        self.assertEqual(len(ladder_violations(0.5, [3.0], 2.0, 1.0)), 2)

    def test_equality(self):
        self.assertEqual(self.ladder, RateLadder(0.5, (1.0, 1.5, 2.0), 2.5))
        self.assertNotEqual(self.ladder, RateLadder(0.5, [1.0, 1.5], 2.5))
        self.assertEqual(hash(self.ladder), hash(RateLadder(0.5, [1.0, 1.5, 2.0], 2.5)))


class TestSnr(unittest.TestCase):

    def test_snr_db(self):
        self.assertEqual(snr_db(1.0), 0.0)
        self.assertAlmostEqual(snr_db(0.01), 20.0, delta=1e-12)
        self.assertRaises(ValueError, snr_db, 0.0)
        self.assertRaises(ValueError, snr_db, -1.0)

    def test_inverse(self):
        for snr in [15.0, 10.0, 5.0, 0.0, -5.0]:
            self.assertAlmostEqual(snr_db(nu_from_snr_db(snr)), snr, delta=1e-12)


class TestNuProfile(unittest.TestCase):

    def setUp(self):
        self.ladder = RateLadder(1.0, [2.0], 3.0)

    def test_from_nu(self):
        profile = NuProfile.from_nu(self.ladder, [1.0, 0.5, 0.25, 0.125])
        self.assertEqual(profile.base_nu, 1.0)
        self.assertEqual(nu_at(profile, RateIndex.at_level(0)), 0.25)
        self.assertEqual(profile.nu_at(RateIndex.maximum()), 0.125)
        self.assertEqual(profile.snr_at(RateIndex.zero()), 0.0)
        self.assertEqual(len(profile.table()), 4)

    def test_sigma_gain(self):
        profile = NuProfile(self.ladder, [0.5, 0.25, 0.25, 0.25], [0.5, 0.5, 1.0, 2.0])
        self.assertTrue(np.array_equal(profile.nu, [1.0, 0.5, 0.25, 0.125]))

    def test_non_increasing_below_min(self):
        profile = NuProfile.from_nu(self.ladder, [0.5, 0.5, 0.25, 0.125])
        self.assertEqual(profile.base_nu, 0.5)

    def test_monotonicity_violation(self):
        with self.assertRaises(ProfileError) as cm:
            NuProfile.from_nu(self.ladder, [1.0, 0.5, 0.5, 0.125])
        self.assertIn("monotonicity", str(cm.exception))
        self.assertRaises(ProfileError, NuProfile.from_nu, self.ladder, [0.4, 0.5, 0.25, 0.125])

    def test_shape_and_values(self):
        self.assertRaises(ProfileError, NuProfile.from_nu, self.ladder, [1.0, 0.5, 0.25])
        self.assertRaises(ProfileError, NuProfile.from_nu, self.ladder, [1.0, 0.5, 0.25, 0.0])
        self.assertRaises(ProfileError, NuProfile.from_nu, self.ladder, [1.0, 0.5, 0.25, math.nan])

    def test_level_outside_profile(self):
        profile = NuProfile.from_nu(self.ladder, [1.0, 0.5, 0.25, 0.125])
        self.assertRaises(ProfileIncompleteError, profile.nu_at, RateIndex.at_level(1))

    def test_default_profile(self):
        profile = default_profile(0.2, 0.3, self.ladder)
        expected = 0.2 * np.exp(-0.3 * np.array([0.0, 1.0, 2.0, 3.0]))
        self.assertTrue(np.allclose(profile.nu, expected, rtol=1e-15, atol=0.0))
        self.assertEqual(profile.base_nu, 0.2)
        self.assertRaises(ProfileError, default_profile, 0.2, 0.0, self.ladder)
        self.assertRaises(ProfileError, default_profile, 0.0, 0.3, self.ladder)

    def test_random_profiles_strictly_decreasing(self):
        rng = np.random.default_rng(33)
        for _ in range(1000):
            r = int(rng.integers(1, 6))
            steps = rng.uniform(0.1, 1.0, r + 2)
            rates = np.cumsum(steps)
            ladder = RateLadder(rates[0], rates[1:-1], rates[-1])
            profile = default_profile(float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.05, 1.0)), ladder)
            self.assertTrue(np.all(np.diff(profile.nu) < 0.0))


if __name__ == "__main__":
    unittest.main()
