import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dftsofdm import modem
from dftsofdm.modem import Scheme
from dftsofdm.waveform import (OfdmConfig, TimeSignal, avg_psd, ccdf_level, make_fdss, no_fdss,
                               ofdm_modulate, papr_ccdf, papr_db, papr_samples, power_norm,
                               sinc2, transmit)


def fdss_oracle(beta_db, n):
    # direct transcription of the window definition, independent of make_fdss
    beta = 10 ** (beta_db / 20)
    c = (1 - beta) / (1 + beta)
    omega = math.sqrt(1 + (1 - beta) ** 2 / (2 * (1 + beta) ** 2))
    return np.array([(1 - c * math.cos((2 * math.pi * k + math.pi) / n)) / omega
                     for k in range(n)])


class TestFdss:
    def test_flat(self):
        np.testing.assert_array_equal(make_fdss(0.0, 24).values, np.ones(24))

    @pytest.mark.parametrize("beta_db", [-5, -14])
    @pytest.mark.parametrize("n", [24, 96])
    def test_unit_mean_power(self, beta_db, n):
        w = make_fdss(beta_db, n)
        assert abs(w.mean_power - 1.0) < 1e-9
        np.testing.assert_allclose(w.values, fdss_oracle(beta_db, n), rtol=1e-13)

    @pytest.mark.parametrize("n", [24, 96, 288])
    def test_ripple_at_sampled_extremes(self, n):
        # sampled cosine peaks at cos(pi/n), so min/max approaches beta as n grows
        w = make_fdss(-14, n)
        c = (1 - w.beta) / (1 + w.beta)
        ratio = (1 - c * math.cos(math.pi / n)) / (1 + c * math.cos(math.pi / n))
        assert abs(w.values.min() / w.values.max() - ratio) < 1e-12
        assert abs(ratio - w.beta) < 0.01 * 96 / n

    def test_continuous_envelope_ripple(self):
        w = make_fdss(-14, 10)
        c = (1 - w.beta) / (1 + w.beta)
        assert abs((1 - c) / (1 + c) - 10 ** (-14 / 20)) < 1e-12

    def test_symmetric(self):
        v = make_fdss(-14, 96).values
        np.testing.assert_allclose(v, v[::-1], atol=1e-14)

    def test_positive_beta_rejected(self):
        with pytest.raises(ValueError):
            make_fdss(1.0, 12)

    def test_read_only(self):
        with pytest.raises(ValueError):
            make_fdss(-5, 12).values[0] = 2.0


class TestPowerNorm:
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_flat_window_gives_one(self, scheme):
        assert power_norm(scheme, no_fdss(96)) == pytest.approx(1.0, abs=1e-12)

    def test_roqpsk_fdss_oracle(self):
        F = fdss_oracle(-14, 96)
        w = 1 - np.cos(2 * np.pi * np.arange(96) / 96)
        expected = 1 / math.sqrt(sum(w * F ** 2) / 96)
        assert power_norm("RO_QPSK", make_fdss(-14, 96)) == pytest.approx(expected, rel=1e-12)
        # Hann weighting emphasises the centre where the window peaks
        assert expected < 1.0

    @pytest.mark.parametrize("scheme", list(Scheme))
    @pytest.mark.parametrize("beta_db", [0, -5, -14])
    def test_average_transmit_power(self, scheme, beta_db):
        cfg = OfdmConfig(n_sc=24, n_fft=256, n_cp=0)
        rng = np.random.default_rng(abs(beta_db) * 10 + list(Scheme).index(scheme))
        bits = modem.random_bits(rng, scheme, cfg.n_sc, 10_000)
        sig = transmit(bits, scheme, make_fdss(beta_db, cfg.n_sc), cfg)
        power = np.mean(np.abs(sig.body) ** 2)
        assert power == pytest.approx(cfg.n_sc / cfg.n_fft, rel=0.02)


class TestModulate:
    def test_dc_tone(self):
        cfg = OfdmConfig(n_sc=4, n_fft=16, n_cp=4)
        X = np.zeros(4, complex)
        X[0] = math.sqrt(16)
        sig = ofdm_modulate(X, no_fdss(4), 1.0, cfg)
        np.testing.assert_allclose(sig.samples, np.ones(20), atol=1e-12)

    def test_explicit_sum(self, rng):
        cfg = OfdmConfig(n_sc=6, n_fft=16, n_cp=3)
        X = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        win = make_fdss(-5, 6)
        sig = ofdm_modulate(X, win, 1.3, cfg)
        n = np.arange(-3, 16)
        k = np.arange(6)
        expected = 1.3 / 4 * np.exp(2j * np.pi * np.outer(n, k) / 16) @ (win.values * X)
        np.testing.assert_allclose(sig.samples, expected, atol=1e-12)

    def test_parseval_and_cp(self, rng, small_cfg):
        X = rng.standard_normal((5, 12)) + 1j * rng.standard_normal((5, 12))
        win = make_fdss(-14, 12)
        sig = ofdm_modulate(X, win, 0.9, small_cfg)
        np.testing.assert_allclose(np.sum(np.abs(sig.body) ** 2, axis=-1),
                                   0.81 * np.sum(np.abs(win.values * X) ** 2, axis=-1))
        np.testing.assert_array_equal(sig.samples[:, :8], sig.body[:, -8:])

    def test_dimension_mismatch(self, small_cfg):
        with pytest.raises(ValueError):
            ofdm_modulate(np.ones(10), no_fdss(12), 1.0, small_cfg)

    @pytest.mark.parametrize("kwargs", [dict(n_sc=0), dict(n_sc=300, n_fft=256),
                                        dict(n_cp=2048), dict(n_cp=-1)])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            OfdmConfig(**kwargs)

    def test_config_durations(self):
        cfg = OfdmConfig(n_sc=96, n_fft=1024, n_cp=72)
        assert cfg.sample_rate_hz == 15.36e6
        assert cfg.symbol_duration_s == pytest.approx((1 + 72 / 1024) / 15e3)


class TestPapr:
    def test_dc_tone_zero_db(self):
        cfg = OfdmConfig(n_sc=8, n_fft=64)
        c = math.sqrt(8 / 64)
        assert papr_db(TimeSignal(np.full(64, c, complex), 0), cfg) == pytest.approx(0.0,
                                                                                   abs=1e-12)

    def test_excludes_cp(self):
        cfg = OfdmConfig(n_sc=8, n_fft=8, n_cp=2)
        s = np.array([9, 9, 1, 1, 1, 1, 1, 1, 1, 1], complex)
        assert papr_db(TimeSignal(s, 2), cfg) == pytest.approx(0.0)

    def test_zero_signal(self, small_cfg):
        with pytest.raises(ValueError):
            papr_db(TimeSignal(np.zeros(72, complex), 8), small_cfg)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(-math.pi, math.pi))
    def test_phase_invariance(self, seed, phi):
        cfg = OfdmConfig(n_sc=12, n_fft=128)
        bits = modem.random_bits(np.random.default_rng(seed), "RO_QPSK", 12)
        X = modem.dft_precode(modem.map_ro_qpsk(bits))
        a = papr_db(ofdm_modulate(X, no_fdss(12), 1.0, cfg), cfg)
        b = papr_db(ofdm_modulate(np.exp(1j * phi) * X, no_fdss(12), 1.0, cfg), cfg)
        assert a == pytest.approx(b, abs=1e-9)

    def test_ccdf_deterministic(self):
        cfg = OfdmConfig(n_sc=24, n_fft=256)
        a = papr_samples("QPSK", 0, cfg, 3000, seed=5)
        b = papr_samples("QPSK", 0, cfg, 3000, seed=5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, papr_samples("QPSK", 0, cfg, 3000, seed=6))

    def test_ccdf_prefix_stable_across_trial_count(self):
        # chunked streams: the first chunk is the same whatever the total
        cfg = OfdmConfig(n_sc=24, n_fft=256)
        a = papr_samples("PI2_BPSK", 0, cfg, 100, seed=1, chunk=100)
        b = papr_samples("PI2_BPSK", 0, cfg, 250, seed=1, chunk=100)
        np.testing.assert_array_equal(a, b[:100])

    def test_ccdf_curve_shape(self):
        cfg = OfdmConfig(n_sc=24, n_fft=256)
        curve = papr_ccdf("RO_QPSK", 0, cfg, 2000, seed=3)
        assert np.all(np.diff(curve.papr_db) >= 0)
        assert np.all(np.diff(curve.ccdf) < 0)
        assert curve.ccdf[0] < 1 and curve.ccdf[-1] == 0

    def test_ccdf_level_interpolation(self):
        x = np.arange(10.0)
        # ccdf values 0.9, 0.8, ... 0.0 at x = 0 .. 9
        assert ccdf_level(x, 0.45) == pytest.approx(4.5)
        with pytest.raises(ValueError):
            ccdf_level(x, 0.95)

    def test_odd_n_sc_rejected_for_roqpsk(self):
        with pytest.raises(ValueError, match="even"):
            papr_samples("RO_QPSK", 0, OfdmConfig(n_sc=11, n_fft=64), 10, seed=1)


class TestPsd:
    def test_sinc2(self):
        assert sinc2(0.0) == 1.0
        assert sinc2(1e-10) == pytest.approx(1.0)
        np.testing.assert_allclose(sinc2(np.array([1.0, 2.0, -3.0])), 0.0, atol=1e-30)
        assert sinc2(0.5) == pytest.approx((2 / math.pi) ** 2)

    def test_zero_cp_samples_window(self):
        cfg = OfdmConfig(n_sc=12, n_fft=64, n_cp=0)
        win = make_fdss(-14, 12)
        f = 15e3 * np.arange(12)
        np.testing.assert_allclose(avg_psd("QPSK", win, 1.0, cfg, f), win.values ** 2,
                                   atol=1e-14)

    def test_roqpsk_dc_null(self):
        cfg = OfdmConfig(n_sc=12, n_fft=64, n_cp=0)
        p = avg_psd("RO_QPSK", no_fdss(12), 1.0, cfg, 15e3 * np.arange(12))
        assert p[0] == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(p, modem.hann_weights(12), atol=1e-14)

    def test_far_oob_ordering(self):
        cfg = OfdmConfig(n_sc=288, n_fft=4096, n_cp=288)
        f = [2 * 288 * 15e3]
        qpsk = avg_psd("QPSK", no_fdss(288), 1.0, cfg, f)[0]
        ro = avg_psd("RO_QPSK", no_fdss(288), 1.0, cfg, f)[0]
        assert ro < qpsk

    def test_matches_monte_carlo_periodogram(self):
        # zero-CP symbols: the expected periodogram on the FFT grid equals
        # the closed form sampled at the subcarrier frequencies
        cfg = OfdmConfig(n_sc=16, n_fft=64, n_cp=0)
        rng = np.random.default_rng(9)
        bits = modem.random_bits(rng, "RO_QPSK", 16, 20000)
        sig = transmit(bits, "RO_QPSK", make_fdss(-5, 16), cfg)
        emp = np.mean(np.abs(np.fft.fft(sig.body, axis=-1, norm="ortho")[:, :16]) ** 2, axis=0)
        win = make_fdss(-5, 16)
        theory = avg_psd("RO_QPSK", win, power_norm("RO_QPSK", win), cfg,
                         15e3 * np.arange(16))
        np.testing.assert_allclose(emp, theory, atol=0.05)

    @given(st.floats(-1e7, 1e7))
    def test_non_negative_and_symmetric(self, f):
        cfg = OfdmConfig(n_sc=24, n_fft=256, n_cp=18)
        win = make_fdss(-14, 24)
        centre = 15e3 * 23 / 2
        p = avg_psd("QPSK", win, 1.0, cfg, [centre + f, centre - f])
        assert p[0] >= 0
        assert p[0] == pytest.approx(p[1], rel=1e-9, abs=1e-18)

    def test_empty_grid(self, small_cfg):
        with pytest.raises(ValueError):
            avg_psd("QPSK", no_fdss(12), 1.0, small_cfg, [])
