import numpy as np
import pytest

from halftonelab.errors import InvalidParam
from halftonelab.hvs import (
    HvsFilter,
    apply_hvs,
    build_gaussian_hvs,
    build_nasanen_hvs,
)
from halftonelab.image import constant_image


class TestGaussian:
    def test_delta_limit(self):
        f = build_gaussian_hvs(sigma=0.01, radius=1)
        assert f.kernel[1, 1] > 0.999

    def test_normalization(self):
        f = build_gaussian_hvs(sigma=2.0, radius=6)
        assert abs(f.kernel.sum() - 1.0) <= 1e-12

    def test_center_max_and_axis_monotone(self):
        f = build_gaussian_hvs(sigma=2.0, radius=6)
        k = f.kernel
        r = f.radius
        assert k[r, r] == k.max()
        row = k[r, r:]
        col = k[r:, r]
        assert np.all(np.diff(row) < 0)
        assert np.all(np.diff(col) < 0)
        # oracle: direct Gaussian evaluation
        ax = np.arange(-r, r + 1)
        direct = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * 4.0))
        direct /= direct.sum()
        np.testing.assert_allclose(k, direct, atol=1e-15)

    def test_invalid_params(self):
        with pytest.raises(InvalidParam):
            build_gaussian_hvs(sigma=0.0)
        with pytest.raises(InvalidParam):
            build_gaussian_hvs(radius=0)


class TestNasanen:
    def test_normalization(self):
        f = build_nasanen_hvs(scale=2000.0, size=23)
        assert abs(f.kernel.sum() - 1.0) <= 1e-12

    def test_lowpass_frequency_response(self):
        f = build_nasanen_hvs(scale=2000.0, size=23)
        resp = np.abs(np.fft.fft2(np.fft.ifftshift(f.kernel)))
        dc = resp[0, 0]
        nyquist = resp[11, 11]  # closest bin to (0.5, 0.5) cycles/pixel
        assert abs(dc - 1.0) < 1e-12
        assert nyquist < dc

    def test_doubling_scale_widens_support(self):
        def second_moment(f):
            r = f.kernel.shape[0] // 2
            ax = np.arange(-r, r + 1, dtype=float)
            rr = ax[:, None] ** 2 + ax[None, :] ** 2
            return float((np.abs(f.kernel) * rr).sum() / np.abs(f.kernel).sum())

        m1 = second_moment(build_nasanen_hvs(scale=2000.0, size=31))
        m2 = second_moment(build_nasanen_hvs(scale=4000.0, size=31))
        assert m2 > m1

    def test_invalid_params(self):
        with pytest.raises(InvalidParam):
            build_nasanen_hvs(scale=-1.0)
        with pytest.raises(InvalidParam):
            build_nasanen_hvs(size=10)


class TestApply:
    def test_constant_preserved(self, gauss_hvs):
        out = apply_hvs(gauss_hvs, constant_image(8, 8, 0.6).data)
        np.testing.assert_allclose(out, 0.6, atol=1e-12)

    def test_impulse_kernel_identity(self):
        k = np.zeros((3, 3))
        k[1, 1] = 1.0
        f = HvsFilter(k, "gaussian", {})
        rng = np.random.default_rng(0)
        img = rng.uniform(size=(9, 7))
        np.testing.assert_array_equal(apply_hvs(f, img), img)

    def test_impulse_response_is_kernel(self, gauss_hvs):
        img = np.zeros((15, 15))
        img[7, 7] = 1.0
        out = apply_hvs(gauss_hvs, img)
        np.testing.assert_allclose(out[1:14, 1:14], gauss_hvs.kernel, atol=1e-12)
        assert np.all(np.abs(out[0, :]) < 1e-12)

    def test_linearity(self, gauss_hvs):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=(12, 12))
        y = rng.uniform(size=(12, 12))
        lhs = apply_hvs(gauss_hvs, 0.7 * x + 1.3 * y)
        rhs = 0.7 * apply_hvs(gauss_hvs, x) + 1.3 * apply_hvs(gauss_hvs, y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    @pytest.mark.parametrize("g", [0.0, 0.25, 0.5, 1.0])
    def test_constant_preservation_sweep(self, gauss_hvs, g):
        out = apply_hvs(gauss_hvs, np.full((10, 13), g))
        np.testing.assert_allclose(out, g, atol=1e-10)

    def test_fft_convolution_oracle_interior(self, gauss_hvs):
        # circular FFT convolution agrees away from the boundary
        rng = np.random.default_rng(2)
        img = rng.uniform(size=(32, 32))
        out = apply_hvs(gauss_hvs, img)
        kpad = np.zeros_like(img)
        r = gauss_hvs.radius
        kpad[:2 * r + 1, :2 * r + 1] = gauss_hvs.kernel
        kpad = np.roll(kpad, (-r, -r), axis=(0, 1))
        circ = np.fft.ifft2(np.fft.fft2(img) * np.conj(np.fft.fft2(kpad))).real
        np.testing.assert_allclose(out[r:-r, r:-r], circ[r:-r, r:-r], atol=1e-8)
