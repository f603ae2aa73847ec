import warnings

import numpy as np
import pytest

from sarpost.errors import UndefinedMetricError
from sarpost.metrics import (
    DB_SENTINEL,
    evaluate,
    mislr_db,
    mpslr_db,
    nmse_db,
    psnr_db,
    ssim,
    support_from_truth,
    SupportSet,
)

from conftest import random_complex


class TestNmse:
    def test_perfect_reconstruction_sentinel(self, rng):
        x = random_complex(rng, (8, 8))
        assert nmse_db(x, x) == -DB_SENTINEL

    def test_double_is_zero_db(self, rng):
        x = random_complex(rng, (8, 8))
        assert nmse_db(x, 2 * x) == pytest.approx(0.0, abs=1e-12)

    def test_zero_reconstruction_is_zero_db(self, rng):
        x = random_complex(rng, (8, 8))
        assert nmse_db(x, np.zeros_like(x)) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("c", [0.0, 0.5, 2.0])
    def test_scaling_identity(self, rng, c):
        # nmse_db(X, cX) = 20 log10 |1 - c| for c != 1
        x = random_complex(rng, (6, 6))
        assert nmse_db(x, c * x) == pytest.approx(20 * np.log10(abs(1 - c)), abs=1e-9)

    def test_zero_truth_rejected(self):
        with pytest.raises(UndefinedMetricError):
            nmse_db(np.zeros((4, 4)), np.ones((4, 4)))


class TestPsnr:
    def test_unit_magnitude_vs_zero(self):
        x = np.ones((8, 8), dtype=complex)
        assert psnr_db(x, np.zeros_like(x)) == pytest.approx(0.0, abs=1e-12)

    def test_identical_sentinel(self, rng):
        x = random_complex(rng, (8, 8))
        assert psnr_db(x, x) == DB_SENTINEL

    def test_hand_case_2x2(self):
        # RMSE = 0.25, peak = 1 -> 20 log10 4
        x = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        xh = np.array([[0.5, 0.0], [0.0, 0.0]], dtype=complex)
        assert psnr_db(x, xh) == pytest.approx(20 * np.log10(4.0), abs=1e-12)


class TestSsim:
    def test_identity_is_one(self, rng):
        x = random_complex(rng, (32, 32))
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-15)

    def test_independent_noise_decorrelated(self):
        vals = []
        for seed in range(20):
            r = np.random.default_rng(seed)
            a = r.standard_normal((64, 64)) + 1j * r.standard_normal((64, 64))
            b = r.standard_normal((64, 64)) + 1j * r.standard_normal((64, 64))
            vals.append(ssim(a, b))
        assert np.max(np.abs(vals)) < 0.1

    def test_constant_offset_reduces_luminance_only(self, rng):
        mag = np.abs(random_complex(rng, (32, 32))) + 0.5
        assert ssim(mag, mag + 0.5) < 1.0

    def test_symmetric_under_equal_peaks(self, rng):
        a = np.abs(random_complex(rng, (24, 24)))
        b = np.abs(random_complex(rng, (24, 24)))
        peak = max(a.max(), b.max())
        a[0, 0] = peak
        b[0, 0] = peak
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_range(self, rng):
        for seed in range(5):
            r = np.random.default_rng(seed)
            a = random_complex(r, (24, 24))
            b = random_complex(r, (24, 24))
            assert -1.0 <= ssim(a, b) <= 1.0


class TestSidelobeMetrics:
    def make_support(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:5, 2:5] = True
        return SupportSet(mask)

    def test_mpslr_direct_substitution(self):
        s = self.make_support()
        x = np.zeros((8, 8), dtype=complex)
        x[3, 3] = 1.0      # main peak 1
        x[0, 0] = 0.1      # side peak 0.1
        assert mpslr_db(x, s) == pytest.approx(-20.0, abs=1e-12)

    def test_mpslr_zero_sidelobes_sentinel(self):
        s = self.make_support()
        x = np.zeros((8, 8), dtype=complex)
        x[3, 3] = 1.0
        assert mpslr_db(x, s) == -DB_SENTINEL

    def test_mpslr_equal_peaks_zero(self):
        s = self.make_support()
        x = np.zeros((8, 8), dtype=complex)
        x[3, 3] = 0.7
        x[7, 7] = 0.7
        assert mpslr_db(x, s) == pytest.approx(0.0, abs=1e-12)

    def test_mislr_direct_substitution(self):
        s = self.make_support()
        x = np.zeros((8, 8), dtype=complex)
        x[3, 3] = 1.0          # E_main = 1
        x[0, 0] = 0.1          # E_side = 0.01
        assert mislr_db(x, s) == pytest.approx(-20.0, abs=1e-12)

    def test_mislr_all_main_sentinel(self):
        s = self.make_support()
        x = np.zeros((8, 8), dtype=complex)
        x[2:5, 2:5] = 0.5
        assert mislr_db(x, s) == -DB_SENTINEL

    def test_mislr_equal_energy_zero(self):
        s = self.make_support()
        x = np.zeros((8, 8), dtype=complex)
        x[3, 3] = 1.0
        x[0, 0] = 1.0
        assert mislr_db(x, s) == pytest.approx(0.0, abs=1e-12)

    def test_scale_invariance(self, rng):
        s = self.make_support()
        x = random_complex(rng, (8, 8))
        c = 3.7 * np.exp(0.4j)
        assert mpslr_db(c * x, s) == pytest.approx(mpslr_db(x, s), abs=1e-9)
        assert mislr_db(c * x, s) == pytest.approx(mislr_db(x, s), abs=1e-9)

    def test_zero_main_rejected(self):
        s = self.make_support()
        x = np.zeros((8, 8), dtype=complex)
        x[0, 0] = 1.0
        with pytest.raises(UndefinedMetricError):
            mpslr_db(x, s)

    def test_degenerate_support_rejected(self):
        x = np.ones((4, 4), dtype=complex)
        with pytest.raises(UndefinedMetricError):
            mpslr_db(x, SupportSet(np.ones((4, 4), dtype=bool)))


class TestSupportFromTruth:
    def test_zero_threshold_nonzero_pixels(self):
        x = np.zeros((6, 6), dtype=complex)
        x[1, 2] = 0.5j
        s = support_from_truth(x, 0.0)
        assert s.mask.sum() == 1 and s.mask[1, 2]

    def test_high_threshold_warns(self):
        x = np.ones((4, 4), dtype=complex)
        with pytest.warns(RuntimeWarning):
            s = support_from_truth(x, 2.0)
        assert s.is_degenerate

    def test_binary_image_threshold_equivalence(self):
        x = (np.arange(16).reshape(4, 4) % 3 == 0).astype(complex)
        a = support_from_truth(x, 0.0)
        b = support_from_truth(x, 0.5)
        assert np.array_equal(a.mask, b.mask)


class TestEvaluate:
    def test_report_fields(self, rng):
        x = random_complex(rng, (16, 16))
        xh = x + 0.1 * random_complex(rng, (16, 16))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = support_from_truth(x, np.abs(x).mean())
        rep = evaluate(x, xh, s, seed=7)
        assert rep.seed == 7
        assert np.isfinite(rep.nmse_db) and np.isfinite(rep.ssim)

    def test_sentinel_flag(self, rng):
        x = random_complex(rng, (8, 8))
        rep = evaluate(x, x)
        assert rep.has_sentinel
