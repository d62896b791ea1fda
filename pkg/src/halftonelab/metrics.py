"""Quality metrics and the global reward.

The error metric combines tone error and structure, computed on the
normalized [0, 1] domain:

    error = MSE(G(h), G(c)) - omega_s * SSIM(h, c)

where G is the HVS low-pass filter.  The filter is applied only inside the
MSE term; SSIM sees the raw halftone.  The reward is the negated error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, ImageTooSmall, InvalidParam
from .hvs import HvsFilter, apply_hvs, build_gaussian_hvs
from .image import BinaryImage, GrayImage

DEFAULT_OMEGA_S = 0.006
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
# dynamic range of the normalized pixel domain
SSIM_L = 1.0


@dataclass(frozen=True)
class ErrorMetricConfig:
    omega_s: float = DEFAULT_OMEGA_S
    hvs: HvsFilter = field(default_factory=build_gaussian_hvs)
    ssim_window: int = SSIM_WINDOW
    ssim_sigma: float = SSIM_SIGMA
    ssim_k1: float = SSIM_K1
    ssim_k2: float = SSIM_K2

    def __post_init__(self):
        if self.omega_s < 0:
            raise InvalidParam("omega_s must be >= 0")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise InvalidParam("ssim_window must be odd and >= 3")

    def ssim_kernel(self) -> np.ndarray:
        r = self.ssim_window // 2
        ax = np.arange(-r, r + 1, dtype=np.float64)
        g = np.exp(-(ax**2) / (2.0 * self.ssim_sigma**2))
        k = np.outer(g, g)
        return k / k.sum()


def _as_array(img) -> np.ndarray:
    if isinstance(img, GrayImage):
        return img.data
    if isinstance(img, BinaryImage):
        return img.astype_float()
    return np.asarray(img, dtype=np.float64)


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape {a.shape} vs {b.shape}")


def mse(a, b) -> float:
    """Mean squared difference over pixels."""
    a, b = _as_array(a), _as_array(b)
    _check_dims(a, b)
    d = a - b
    return float(np.mean(d * d))


def ssim(a, b, cfg: ErrorMetricConfig | None = None) -> float:
    """Mean SSIM over sliding Gaussian-weighted windows, dynamic range 1.

    Window statistics use mirror boundary handling, so the SSIM map covers
    every pixel position and the result is the mean over all of them.
    """
    cfg = cfg or ErrorMetricConfig()
    a, b = _as_array(a), _as_array(b)
    _check_dims(a, b)
    if min(a.shape) < cfg.ssim_window:
        raise ImageTooSmall(
            f"image {a.shape} smaller than SSIM window {cfg.ssim_window}")
    return float(np.mean(_ssim_map(a, b, cfg)))


def _ssim_map(a: np.ndarray, b: np.ndarray, cfg: ErrorMetricConfig) -> np.ndarray:
    w = cfg.ssim_kernel()
    c1 = (cfg.ssim_k1 * SSIM_L) ** 2
    c2 = (cfg.ssim_k2 * SSIM_L) ** 2
    conv = lambda x: ndimage.correlate(x, w, mode="mirror")
    mu_a, mu_b = conv(a), conv(b)
    var_a = conv(a * a) - mu_a * mu_a
    var_b = conv(b * b) - mu_b * mu_b
    cov = conv(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def hvs_psnr(h, c, hvs: HvsFilter) -> float:
    """PSNR in dB between HVS-filtered halftone and continuous tone.

    Peak is 1.0 (normalized domain).  Returns +inf when the filtered
    images match exactly.
    """
    e = mse(apply_hvs(hvs, _as_array(h)), apply_hvs(hvs, _as_array(c)))
    if e == 0.0:
        return math.inf
    return float(10.0 * np.log10(1.0 / e))


def error_metric(h, c, cfg: ErrorMetricConfig | None = None) -> float:
    """MSE(G(h), G(c)) - omega_s * SSIM(h, c).

    The SSIM term is skipped entirely when omega_s == 0, which keeps the
    metric defined on images smaller than the SSIM window.
    """
    cfg = cfg or ErrorMetricConfig()
    h, c = _as_array(h), _as_array(c)
    _check_dims(h, c)
    tone = mse(apply_hvs(cfg.hvs, h), apply_hvs(cfg.hvs, c))
    if cfg.omega_s == 0.0:
        return tone
    return tone - cfg.omega_s * ssim(h, c, cfg)


def reward(h, c, cfg: ErrorMetricConfig | None = None) -> float:
    """Global reward: the negated error metric."""
    return -error_metric(h, c, cfg)
