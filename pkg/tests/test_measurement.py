import math

import numpy as np
import pytest

from resfluor.measurement import (
    CountRecord,
    DetectorParams,
    PowerCalibration,
    RNG_NAME,
    interference_dip_rate,
    photon_rate_to_power,
    pixel_rng,
    saturation_power_calibration,
    shot_noise_contrast,
    simulate_counts,
    snr_of_detection,
)
from resfluor.spectra import SpectrumTrace


def _rate_trace(n=2000, rate=1000.0):
    return SpectrumTrace(np.arange(float(n)), np.full(n, rate),
                         freq_kind="pixel_index", value_kind="counts_per_s")


class TestRng:
    def test_pixel_streams_deterministic_and_independent(self):
        a = pixel_rng(42, 7).poisson(100.0, size=5)
        b = pixel_rng(42, 7).poisson(100.0, size=5)
        c = pixel_rng(42, 8).poisson(100.0, size=5)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_thread_partition_invariance(self):
        tr = _rate_trace(501)
        det = DetectorParams(dark_rate=50.0, integration_time=0.2)
        one = simulate_counts(tr, det, seed=9, n_threads=1)
        eight = simulate_counts(tr, det, seed=9, n_threads=8)
        three = simulate_counts(tr, det, seed=9, n_threads=3)
        assert np.array_equal(one.values, eight.values)
        assert np.array_equal(one.values, three.values)
        assert one.meta["rng"] == RNG_NAME
        assert one.meta["seed"] == 9

    def test_seed_changes_output(self):
        tr = _rate_trace(200)
        det = DetectorParams(dark_rate=0.0)
        a = simulate_counts(tr, det, seed=1)
        b = simulate_counts(tr, det, seed=2)
        assert not np.array_equal(a.values, b.values)


class TestPoissonStatistics:
    def test_mean_and_variance(self):
        # z-test on the sample mean and a loose check on the variance
        rate, t, dark = 800.0, 0.5, 100.0
        tr = _rate_trace(20000, rate)
        det = DetectorParams(dark_rate=dark, integration_time=t)
        c = simulate_counts(tr, det, seed=3).values
        mu = (rate + dark) * t
        z = (c.mean() - mu) / math.sqrt(mu / c.size)
        assert abs(z) < 4.0
        assert c.var() == pytest.approx(mu, rel=0.05)

    def test_quantum_efficiency_scales_signal_not_dark(self):
        tr = _rate_trace(20000, 1000.0)
        det = DetectorParams(dark_rate=200.0, quantum_efficiency=0.5,
                             integration_time=1.0)
        c = simulate_counts(tr, det, seed=4).values
        assert c.mean() == pytest.approx(1000.0 * 0.5 + 200.0, rel=0.01)

    def test_negative_rates_rejected(self):
        tr = SpectrumTrace(np.array([0.0, 1.0]), np.array([10.0, -1.0]),
                           freq_kind="pixel_index", value_kind="counts_per_s")
        with pytest.raises(ValueError):
            simulate_counts(tr, DetectorParams(dark_rate=0.0), seed=0)

    def test_count_record(self):
        det = DetectorParams(dark_rate=10.0, integration_time=2.0)
        rec = CountRecord.sample(500.0, det, seed=5)
        assert rec.sampled_counts >= 0
        assert rec.integration_time == 2.0
        # reproducible
        assert rec == CountRecord.sample(500.0, det, seed=5)


class TestBudgets:
    def test_shot_noise_contrast(self):
        # 127550 cps for 160 ms: about 20 kcounts, 0.7% relative noise
        assert shot_noise_contrast(127550.0, 0.16) == pytest.approx(0.007, rel=0.01)
        with pytest.raises(ValueError):
            shot_noise_contrast(0.0, 1.0)

    def test_interference_dip_rate(self):
        # 550 cps incident beam against 1.1 cps of coherent scattering
        dip = interference_dip_rate(550.0, 1.1)
        assert dip == pytest.approx(2.0 * math.sqrt(550.0 * 1.1), rel=1e-14)
        assert dip == pytest.approx(49.2, abs=0.05)
        assert interference_dip_rate(550.0, 1.1, mode_overlap=0.5) == pytest.approx(dip / 2)
        with pytest.raises(ValueError):
            interference_dip_rate(550.0, 1.1, mode_overlap=1.5)

    def test_snr_of_detection(self):
        det = DetectorParams(dark_rate=150.0)
        snr = snr_of_detection(49.2, 550.0, det, 4.0)
        assert snr == pytest.approx(49.2 * 4.0 / math.sqrt(700.0 * 4.0), rel=1e-12)
        assert 3.0 < snr < 4.5

    def test_photon_rate_to_power(self):
        p = photon_rate_to_power(550.0, 590.0)
        # 550 photons/s of 590 nm light: a few hundred attowatts
        assert p == pytest.approx(1.85e-16, rel=0.01)
        assert photon_rate_to_power(0.0, 590.0) == 0.0

    def test_power_calibration(self):
        cal = saturation_power_calibration(350.0)
        assert cal.saturation(350.0) == 1.0
        assert cal.power(cal.saturation(123.0)) == pytest.approx(123.0, rel=1e-14)
        with pytest.raises(ValueError):
            PowerCalibration(0.0)
        with pytest.raises(ValueError):
            cal.saturation(-1.0)


def test_detector_validation():
    with pytest.raises(ValueError):
        DetectorParams(dark_rate=-1.0)
    with pytest.raises(ValueError):
        DetectorParams(dark_rate=0.0, quantum_efficiency=0.0)
    with pytest.raises(ValueError):
        DetectorParams(dark_rate=0.0, integration_time=0.0)
