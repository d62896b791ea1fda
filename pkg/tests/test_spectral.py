import numpy as np
import pytest

from halftonelab.errors import OutOfRangeGray
from halftonelab.image import BinaryImage, constant_image
from halftonelab.rng import Stream
from halftonelab.spectral import (
    Spectrum,
    anisotropy,
    anisotropy_loss,
    bluenoise_report,
    power_spectrum,
    principal_frequency,
    rapsd,
)


def checkerboard(n):
    yy, xx = np.mgrid[0:n, 0:n]
    return ((yy + xx) % 2).astype(np.uint8)


class TestPowerSpectrum:
    def test_constant_all_dc(self):
        s = power_spectrum(np.ones((4, 4)))
        assert s.power[0, 0] == pytest.approx(16.0, abs=1e-10)
        rest = s.power.copy()
        rest[0, 0] = 0.0
        assert np.all(np.abs(rest) < 1e-10)

    def test_checkerboard_nyquist(self):
        s = power_spectrum(checkerboard(8))
        power = s.power.copy()
        dc = power[0, 0]
        nyq = power[4, 4]
        power[0, 0] = 0.0
        power[4, 4] = 0.0
        assert dc == pytest.approx(16.0, abs=1e-10)   # mean 0.5: (32)^2/64
        assert nyq == pytest.approx(16.0, abs=1e-10)
        assert np.all(np.abs(power) < 1e-10)

    @pytest.mark.parametrize("shape,seed", [((16, 16), 0), ((15, 13), 1), ((8, 32), 2)])
    def test_parseval(self, shape, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(size=shape)
        s = power_spectrum(x)
        assert s.power.sum() == pytest.approx(np.sum(x * x), abs=1e-8)

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(3)
        s = power_spectrum(rng.uniform(size=(12, 10)))
        flipped = s.power[
            np.ix_((-np.arange(12)) % 12, (-np.arange(10)) % 10)]
        np.testing.assert_allclose(s.power, flipped, atol=1e-10)


class TestRapsd:
    def test_constant_zero_off_dc(self):
        prof = rapsd(power_spectrum(np.full((8, 8), 0.7)))
        assert np.all(np.abs(prof.values) < 1e-10)

    def test_checkerboard_outermost_ring_only(self):
        prof = rapsd(power_spectrum(checkerboard(8)))
        nz = np.nonzero(prof.values > 1e-10)[0]
        assert len(nz) == 1
        assert nz[0] == prof.num_rings - 1

    def test_ring_partition_counts(self):
        for shape in [(8, 8), (16, 16), (9, 13)]:
            prof = rapsd(power_spectrum(np.zeros(shape)))
            assert prof.ring_counts.sum() == shape[0] * shape[1] - 1

    def test_white_noise_flat(self):
        u = Stream(7).uniform(64 * 64).reshape(64, 64)
        h = (u < 0.5).astype(np.uint8)
        prof = rapsd(power_spectrum(h))
        big = prof.ring_counts >= 16
        vals = prof.values[big]
        assert vals.max() / vals.min() < 3.0


class TestAnisotropy:
    def test_ring_constant_spectrum_zero(self):
        # power depends only on the ring: within-ring variance is 0
        power = np.zeros((8, 8))
        prof = rapsd(Spectrum(power))
        ring_index = np.zeros((8, 8), dtype=int)
        ky = np.fft.fftfreq(8) * 8
        rr = np.hypot(*np.meshgrid(ky, ky, indexing="ij"))
        ring_index = np.rint(rr).astype(int)
        power = ring_index.astype(float) + 1.0
        power[0, 0] = 5.0
        s = Spectrum(power)
        ani = anisotropy(s)
        assert np.all(ani.linear[ani.defined] == 0.0)
        assert np.all(ani.values_db[ani.defined] == -np.inf)

    def test_two_bin_ring_hand_example(self):
        # 1x3 grid: the only ring holds the two non-DC bins; set powers 1, 3
        s = Spectrum(np.array([[9.0, 1.0, 3.0]]))
        prof = rapsd(s)
        assert prof.num_rings == 1
        assert prof.ring_counts[0] == 2
        assert prof.values[0] == pytest.approx(2.0)
        ani = anisotropy(s, prof)
        assert ani.linear[0] == pytest.approx(0.5, abs=1e-15)
        assert ani.values_db[0] == pytest.approx(10 * np.log10(0.5))

    def test_small_rings_undefined(self):
        s = power_spectrum(checkerboard(8))
        ani = anisotropy(s)
        prof = rapsd(s)
        assert not ani.defined[prof.num_rings - 1]  # single-bin Nyquist ring


class TestAnisotropyLoss:
    def test_constant_map_zero(self):
        value, grad = anisotropy_loss(np.full((16, 16), 0.37))
        assert value <= 1e-10
        assert np.all(np.abs(grad) < 1e-10)

    @pytest.mark.parametrize("shape,seed", [((8, 8), 0), ((16, 16), 1),
                                            ((16, 16), 2), ((17, 13), 3),
                                            ((17, 13), 4)])
    def test_gradient_matches_finite_differences(self, shape, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(0.2, 0.8, size=shape)
        value, grad = anisotropy_loss(p)
        step = 1e-5
        coords = [(rng.integers(shape[0]), rng.integers(shape[1]))
                  for _ in range(12)]
        for (y, x) in coords:
            up = p.copy(); up[y, x] += step
            dn = p.copy(); dn[y, x] -= step
            fd = (anisotropy_loss(up)[0] - anisotropy_loss(dn)[0]) / (2 * step)
            denom = max(abs(fd), abs(grad[y, x]), 1e-10)
            assert abs(fd - grad[y, x]) / denom < 1e-4

    def test_descent(self):
        rng = np.random.default_rng(5)
        p = rng.uniform(0.3, 0.7, size=(32, 32))
        value, grad = anisotropy_loss(p)
        for _ in range(10):
            p = np.clip(p - 0.05 * grad, 0.01, 0.99)
            new_value, grad = anisotropy_loss(p)
            assert new_value < value
            value = new_value


class TestPrincipalFrequency:
    def test_quarter(self):
        assert principal_frequency(0.25) == pytest.approx(0.5)

    def test_half(self):
        assert principal_frequency(0.5) == pytest.approx(np.sqrt(0.5))

    @pytest.mark.parametrize("g", [0.1, 0.3, 0.45])
    def test_symmetry(self, g):
        assert principal_frequency(g) == pytest.approx(principal_frequency(1 - g))

    def test_domain(self):
        with pytest.raises(OutOfRangeGray):
            principal_frequency(0.0)
        with pytest.raises(OutOfRangeGray):
            principal_frequency(1.0)


class TestBlueNoiseReport:
    def test_bayer_has_harmonic_spikes(self):
        from halftonelab.classic import bayer_matrix, ordered_dither

        h = ordered_dither(constant_image(64, 64, 0.5), bayer_matrix(8))
        rep = bluenoise_report(h, gray=0.5)
        nonzero = rep.rapsd[rep.rapsd > 1e-12]
        # periodic pattern: all power sits in a few discrete harmonics
        assert rep.rapsd.max() > 10 * np.median(rep.rapsd + 1e-12)
        assert len(nonzero) < rep.rapsd.size / 2

    def test_dbs_low_frequency_ratio(self):
        from halftonelab.classic import dbs, white_noise_threshold
        from halftonelab.hvs import build_nasanen_hvs

        c = constant_image(128, 128, 0.5)
        hvs = build_nasanen_hvs(2000.0, 23)
        h = dbs(c, white_noise_threshold(c, 7), hvs, max_sweeps=12)
        rep = bluenoise_report(h, gray=0.5)
        assert rep.low_freq_power_ratio < 0.1

    def test_white_noise_ratio_high(self):
        from halftonelab.classic import white_noise_threshold

        h = white_noise_threshold(constant_image(128, 128, 0.5), 3)
        rep = bluenoise_report(h, gray=0.5)
        assert rep.low_freq_power_ratio > 0.5

    def test_gray_estimation_flag(self):
        h = BinaryImage(checkerboard(16))
        rep = bluenoise_report(h)
        assert rep.gray_estimated
        assert rep.gray == pytest.approx(0.5)
        assert not bluenoise_report(h, gray=0.5).gray_estimated
