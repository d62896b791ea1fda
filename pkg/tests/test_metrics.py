import math

import numpy as np
import pytest

from halftonelab.errors import DimensionMismatch, ImageTooSmall
from halftonelab.hvs import apply_hvs
from halftonelab.image import BinaryImage, GrayImage, constant_image
from halftonelab.metrics import (
    ErrorMetricConfig,
    error_metric,
    hvs_psnr,
    mse,
    reward,
    ssim,
)

from conftest import random_gray


def ssim_oracle(a: np.ndarray, b: np.ndarray, window=11, sigma=1.5,
                k1=0.01, k2=0.03) -> float:
    """Direct per-window SSIM from the definition, explicit mirror indexing.

    Written independently of the library implementation: loops windows,
    gathers mirror-extended neighborhoods, and evaluates the SSIM formula
    per window.
    """
    r = window // 2
    ax = np.arange(-r, r + 1, dtype=float)
    w = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * sigma**2))
    w /= w.sum()
    c1, c2 = k1**2, k2**2
    height, width = a.shape

    def fold(i, n):
        if n == 1:
            return 0
        period = 2 * n - 2
        j = i % period
        return period - j if j >= n else j

    total = 0.0
    for y in range(height):
        for x in range(width):
            pa = np.empty((window, window))
            pb = np.empty((window, window))
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    sy, sx = fold(y + dy, height), fold(x + dx, width)
                    pa[dy + r, dx + r] = a[sy, sx]
                    pb[dy + r, dx + r] = b[sy, sx]
            mu_a = (w * pa).sum()
            mu_b = (w * pb).sum()
            va = (w * pa * pa).sum() - mu_a**2
            vb = (w * pb * pb).sum() - mu_b**2
            cov = (w * pa * pb).sum() - mu_a * mu_b
            total += (((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                      / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2)))
    return total / (height * width)


class TestMse:
    def test_identity(self):
        x = random_gray((9, 9), 0)
        assert mse(x, x) == 0.0

    def test_max_contrast(self):
        assert mse(np.zeros((2, 2)), np.ones((2, 2))) == 1.0

    def test_hand_value(self):
        assert mse(np.array([[0.5, 0.5]]), np.array([[0.0, 1.0]])) == 0.25

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mse(np.zeros((2, 2)), np.zeros((3, 2)))


class TestSsim:
    def test_self_similarity(self):
        x = random_gray((16, 16), 3)
        assert abs(ssim(x, x) - 1.0) <= 1e-9

    def test_constants(self):
        a = constant_image(12, 12, 0.3)
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_direct_definition_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(size=(32, 32))
        b = rng.uniform(size=(32, 32))
        assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-9)

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            ssim(np.zeros((6, 6)), np.zeros((6, 6)))


class TestHvsPsnr:
    def test_exact_match_is_infinite(self, gauss_hvs):
        rng = np.random.default_rng(1)
        h = BinaryImage((rng.uniform(size=(16, 16)) < 0.5).astype(np.uint8))
        c = GrayImage(h.data.astype(float))
        assert hvs_psnr(h, c, gauss_hvs) == math.inf

    def test_known_mse_gives_20db(self, gauss_hvs):
        # filtered constants differ by 0.1 everywhere: mse = 0.01 -> 20 dB
        a = np.full((16, 16), 0.2)
        b = np.full((16, 16), 0.3)
        assert hvs_psnr(a, b, gauss_hvs) == pytest.approx(20.0, abs=1e-9)

    def test_decreases_with_corruption(self, gauss_hvs, smooth_image):
        from halftonelab.classic import FLOYD_STEINBERG, error_diffusion

        h = error_diffusion(smooth_image, FLOYD_STEINBERG)
        rng = np.random.default_rng(99)
        last = hvs_psnr(h, smooth_image, gauss_hvs)
        for k in (1, 8, 64):
            data = h.data.copy()
            idx = rng.choice(data.size, size=k, replace=False)
            data.reshape(-1)[idx] = 1 - data.reshape(-1)[idx]
            cur = hvs_psnr(BinaryImage(data), smooth_image, gauss_hvs)
            assert cur < last
            last = cur


class TestErrorMetric:
    def test_zero_weight_reduces_to_filtered_mse(self, gauss_hvs):
        cfg = ErrorMetricConfig(omega_s=0.0, hvs=gauss_hvs)
        h = random_gray((16, 16), 5)
        c = random_gray((16, 16), 6)
        expect = mse(apply_hvs(gauss_hvs, h.data), apply_hvs(gauss_hvs, c.data))
        assert error_metric(h, c, cfg) == pytest.approx(expect, rel=1e-12)

    def test_default_weight(self):
        assert ErrorMetricConfig().omega_s == 0.006

    def test_perfect_binary_match(self, gauss_hvs):
        rng = np.random.default_rng(2)
        h = BinaryImage((rng.uniform(size=(16, 16)) < 0.5).astype(np.uint8))
        c = GrayImage(h.data.astype(float))
        cfg = ErrorMetricConfig(hvs=gauss_hvs)
        assert error_metric(h, c, cfg) == pytest.approx(-0.006, abs=1e-12)

    def test_mse_term_symmetric(self, gauss_hvs):
        h = random_gray((16, 16), 7)
        c = random_gray((16, 16), 8)
        a = mse(apply_hvs(gauss_hvs, h.data), apply_hvs(gauss_hvs, c.data))
        b = mse(apply_hvs(gauss_hvs, c.data), apply_hvs(gauss_hvs, h.data))
        assert a == pytest.approx(b, rel=1e-15)

    def test_full_metric_observed_symmetric(self, gauss_hvs):
        # Both the MSE term and SSIM are symmetric in their arguments, so
        # the combined metric is too; pin that down on a fixture.
        h = random_gray((16, 16), 9)
        c = random_gray((16, 16), 10)
        cfg = ErrorMetricConfig(hvs=gauss_hvs)
        assert error_metric(h, c, cfg) == pytest.approx(
            error_metric(c, h, cfg), rel=1e-12)


class TestReward:
    @pytest.mark.parametrize("seed", range(3))
    def test_negated_error(self, gauss_hvs, seed):
        cfg = ErrorMetricConfig(hvs=gauss_hvs)
        h = random_gray((16, 16), 100 + seed)
        c = random_gray((16, 16), 200 + seed)
        assert reward(h, c, cfg) == -error_metric(h, c, cfg)

    def test_monotone_in_error(self, gauss_hvs, smooth_image):
        from halftonelab.classic import FLOYD_STEINBERG, bayer_matrix, error_diffusion, ordered_dither

        cfg = ErrorMetricConfig(hvs=gauss_hvs)
        good = error_diffusion(smooth_image, FLOYD_STEINBERG)
        bad = ordered_dither(smooth_image, bayer_matrix(8))
        assert error_metric(good, smooth_image, cfg) < error_metric(bad, smooth_image, cfg)
        assert reward(good, smooth_image, cfg) > reward(bad, smooth_image, cfg)

    def test_perfect_match_reward(self, gauss_hvs):
        rng = np.random.default_rng(3)
        h = BinaryImage((rng.uniform(size=(16, 16)) < 0.5).astype(np.uint8))
        c = GrayImage(h.data.astype(float))
        cfg = ErrorMetricConfig(hvs=gauss_hvs)
        assert reward(h, c, cfg) == pytest.approx(0.006, abs=1e-12)
