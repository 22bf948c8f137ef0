from __future__ import annotations

import copy
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

import cvqkdadapt.numerics as numerics
import cvqkdadapt.utils as utils
from cvqkdadapt.adapt_core import InfeasibleTargetError
from cvqkdadapt.config import load_config, parse_config
from cvqkdadapt.pipelines import FIGURE_PIPELINES, ExperimentRun, montecarlo_crosscheck, run_experiment

SAMPLE_CONFIG = Path(__file__).resolve().parent.parent / "doc" / "sample_config.json"

SMALL_RAW = {
    "seed": 3,
    "ensemble": {"n_total": 64, "generator": {"l": 40, "noise_variance": [0.1, 0.27], "transmittance": [0.9, 1.0]}},
    "ladder": {"r_min": 0.5, "levels": [1.0, 1.5, 2.0], "r_max": 2.5},
    "profile": {"beta": 0.3},
    "target": 40.0,
    "multiuser": {"users": 2, "m": 20, "targets": [20.0, 25.0], "sigma_omega_sq": 64.0},
    "montecarlo": {"trials": 10000, "snr_db": [0.0, 5.0]},
    "figures": {"m": 40, "sweep_points": 3},
}


def small_config(out_dir, **changes):
    raw = copy.deepcopy(SMALL_RAW)
    raw.update(changes)
    config, violations = parse_config(raw, output_dir=out_dir)
    assert not violations, violations
    return config


def ber_from_terms(n, d):
    return 0.5 * numerics.erfc(math.sqrt(max(0.0, n / d)))


class TestPipelines(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.config = small_config(self.dir / "out")

    def tearDown(self):
        self.tmp.cleanup()

    def test_figure_tables(self):
        results = run_experiment(self.config)
        self.assertEqual(sorted(results), sorted(FIGURE_PIPELINES))

        fig2 = results["fig2"]["delta"]
        self.assertEqual(len(fig2), 40)
        self.assertEqual(list(fig2.columns), ["SUBCHANNEL", "RATE_INDEX", "RATE", "DELTA", "SNR_DB"])

        fig3 = results["fig3"]["ber_sweep"]
        self.assertEqual(len(fig3), 2 * 3 * 5)
        self.assertEqual(list(fig3.columns),
                         ["SWEEP", "NU", "RATE_INDEX", "RATE", "DELTA", "N", "D", "F_VALUE", "BER"])
        self.assertEqual(fig3.NU.min(), 0.1)
        self.assertEqual(fig3.NU.max(), 0.9)

        fig4 = results["fig4"]["ber_snr"]
        self.assertEqual(sorted(set(fig4.SNR_DB)), [-5.0, 0.0, 5.0, 10.0, 15.0])
        self.assertEqual(len(fig4), 5 * 5)

    def test_ber_rows_recompute(self):
        results = run_experiment(self.config, ["fig3", "fig4", "adapt"])
        for table in [results["fig3"]["ber_sweep"], results["fig4"]["ber_snr"], results["adapt"]["trace"]]:
            for n, d, ber in zip(table.N, table.D, table.BER):
                self.assertAlmostEqual(ber, ber_from_terms(n, d), delta=1e-12)

    def test_files_and_manifest(self):
        run_experiment(self.config, ["fig2", "s1"])
        out = self.dir / "out"
        self.assertTrue((out / "fig2_delta.csv").exists())
        self.assertTrue((out / "s1_correction.csv").exists())
        manifest = pd.read_csv(out / utils.MANIFEST)
        self.assertEqual(list(manifest.columns), ["PIPELINE", "FILE", "ROWS", "CONFIG_HASH"])
        self.assertEqual(manifest.FILE.tolist(), ["fig2_delta.csv", "s1_correction.csv"])
        self.assertEqual(manifest.ROWS[0], 40)
        self.assertEqual(set(manifest.CONFIG_HASH), {self.config.digest()})
        fig2 = pd.read_csv(out / "fig2_delta.csv")
        self.assertEqual(len(fig2), manifest.ROWS[0])

    def test_byte_identical(self):
        other = small_config(self.dir / "again")
        run_experiment(self.config)
        run_experiment(other)
        first = sorted((self.dir / "out").iterdir())
        second = sorted((self.dir / "again").iterdir())
        self.assertEqual([p.name for p in first], [p.name for p in second])
        for a, b in zip(first, second):
            self.assertEqual(a.read_bytes(), b.read_bytes(), a.name)

    def test_seed_changes_output(self):
        other = small_config(self.dir / "other", seed=4)
        a = run_experiment(self.config, ["fig2"])["fig2"]["delta"]
        b = run_experiment(other, ["fig2"])["fig2"]["delta"]
        self.assertFalse(a.equals(b))

    def test_correction_tables(self):
        results = run_experiment(self.config, ["s1", "s2", "s3", "s4"])
        s1 = results["s1"]["correction"]
        self.assertTrue(np.array_equal(s1.CORRECTION, s1.DELTA - s1.XI))
        for _, group in s1.groupby("USER"):
            self.assertEqual(group.CORRECTION.min(), 0.0)

        s2 = results["s2"]["quadratures"]
        self.assertEqual(len(s2), len(s1))
        ratio = s2.X_CORRECTED / s2.X
        self.assertTrue(np.allclose(ratio, np.sqrt(s2.CORRECTED_VARIANCE / s2.SIGMA_OMEGA_SQ), rtol=1e-12))

        s3 = results["s3"]["snr"]
        self.assertTrue(np.all(s3.INPUT_SNR_DIFF >= 0.0))
        self.assertTrue(np.array_equal(s3.PHI, s1.CORRECTION))

        s4 = results["s4"]["ber"]
        for _, group in s4.groupby("USER"):
            self.assertTrue(np.all(group.POST_BER == group.PRE_BER.min()))
            for n, d, ber in zip(group.PRE_N, group.PRE_D, group.PRE_BER):
                self.assertAlmostEqual(ber, ber_from_terms(n, d), delta=1e-12)

    def test_user_tables(self):
        results = run_experiment(self.config, ["multiuser", "equalize"])
        channels = results["multiuser"]["channels"]
        self.assertEqual(list(channels.columns)[0], "USER")
        self.assertEqual(len(channels), 40)
        totals = channels.groupby("USER").RATE.sum()
        self.assertGreaterEqual(totals[0], 20.0)
        self.assertGreaterEqual(totals[1], 25.0)
        users = results["equalize"]["users"]
        self.assertIn("SNR_INCREMENT", users.columns)
        self.assertIn("POST_BER", users.columns)

    def test_infeasible(self):
        config = small_config(self.dir / "out", target=1000.0)
        with self.assertRaises(InfeasibleTargetError) as cm:
            run_experiment(config, ["adapt"])
        self.assertEqual(cm.exception.max_achievable, sum([2.5] * 40))
        table = pd.read_csv(self.dir / "out" / "adapt_infeasible.csv")
        self.assertEqual(table.MAX_ACHIEVABLE[0], 100.0)
        self.assertEqual(table.TARGET[0], 1000.0)
        manifest = pd.read_csv(self.dir / "out" / utils.MANIFEST)
        self.assertEqual(manifest.FILE.tolist(), ["adapt_infeasible.csv"])

    def test_unknown_pipeline(self):
        self.assertRaises(ValueError, run_experiment, self.config, ["fig9"])
        self.assertRaises(ValueError, run_experiment, self.config, ["_ber_rows"])


class TestMonteCarlo(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_crosscheck_table(self):
        table = montecarlo_crosscheck(small_config(self.dir))
        self.assertEqual(list(table.columns),
                         ["SNR_DB", "TRIALS", "ANALYTIC_BER", "EMPIRICAL_BER", "STD_ERROR", "PASS"])
        self.assertEqual(table.SNR_DB.tolist(), [0.0, 5.0])
        self.assertAlmostEqual(table.ANALYTIC_BER[0], 0.5 * math.erfc(1.0), delta=1e-15)
        p = table.ANALYTIC_BER[1]
        self.assertEqual(table.STD_ERROR[1], math.sqrt(p * (1.0 - p) / 10000))
        self.assertTrue(table.equals(montecarlo_crosscheck(small_config(self.dir))))

    def test_crosscheck_high_snr(self):
        config = small_config(self.dir, montecarlo={"trials": 10000, "snr_db": [40.0]})
        table = montecarlo_crosscheck(config)
        self.assertEqual(table.EMPIRICAL_BER[0], 0.0)
        self.assertTrue(table.PASS[0])

    def test_too_few_trials(self):
        config = small_config(self.dir, montecarlo={"trials": 9999})
        self.assertRaises(ValueError, montecarlo_crosscheck, config)


class TestSampleConfig(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_variance_correction_negligible(self):
        config = load_config(SAMPLE_CONFIG)
        (user_set,) = ExperimentRun(config).user_sets
        self.assertLess(user_set.correction.corrections.max(), 0.01 * config.multiuser.sigma_omega_sq)

    def test_figures_at_full_scale(self):
        results = run_experiment(load_config(SAMPLE_CONFIG, output_dir=self.dir / "a"))
        self.assertEqual(len(results["fig2"]["delta"]), 1000)
        self.assertEqual(sorted(set(results["fig4"]["ber_snr"].SNR_DB)), [-5.0, 0.0, 5.0, 10.0, 15.0])
        run_experiment(load_config(SAMPLE_CONFIG, output_dir=self.dir / "b"))
        for a in sorted((self.dir / "a").iterdir()):
            self.assertEqual(a.read_bytes(), (self.dir / "b" / a.name).read_bytes(), a.name)


if __name__ == "__main__":
    unittest.main()
