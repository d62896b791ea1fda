"""Human-visual-system low-pass filters.

The error metric, the quality metrics and direct binary search all measure
differences after filtering with a model of the eye's contrast sensitivity.
Two models are provided: a truncated Gaussian (the default) and the Nasanen
exponential contrast-sensitivity model.

Boundary handling is mirror-symmetric (whole-sample, scipy's ``mirror``
mode) everywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidParam

# Nasanen (1984) exponential CSF, in the parameterization common in
# model-based halftoning: H(f) = a L^b exp(-f / (c ln L + d)) with f in
# cycles/degree and L the average luminance in cd/m^2.  The prefactor
# a L^b cancels under DC normalization.  `scale` is the product of device
# resolution and viewing distance (dots/inch * inch); it converts
# cycles/pixel to cycles/degree via f_cpd = f_cpp * scale * pi / 180.
NASANEN_C = 0.525
NASANEN_D = 3.91
NASANEN_LUMINANCE = 11.0  # cd/m^2

DEFAULT_GAUSSIAN_SIGMA = 2.0
DEFAULT_GAUSSIAN_RADIUS = 6
DEFAULT_NASANEN_SCALE = 2000.0
DEFAULT_NASANEN_SIZE = 23


@dataclass(frozen=True)
class HvsFilter:
    """Normalized low-pass kernel with odd side lengths.

    Weights sum to 1 (unit DC gain) and the kernel is symmetric under 180
    degree rotation, so correlation and convolution coincide.
    """

    kernel: np.ndarray
    kind: str
    params: dict

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise InvalidParam(f"kernel must be 2D with odd sides, got {k.shape}")
        if abs(k.sum() - 1.0) > 1e-12:
            raise InvalidParam("kernel weights must sum to 1 within 1e-12")
        if not np.allclose(k, k[::-1, ::-1], rtol=0, atol=1e-12):
            raise InvalidParam("kernel must be symmetric under 180 deg rotation")
        k = np.ascontiguousarray(k)
        k.flags.writeable = False
        object.__setattr__(self, "kernel", k)

    @property
    def radius(self) -> int:
        return self.kernel.shape[0] // 2

    def apply(self, img: np.ndarray) -> np.ndarray:
        return apply_hvs(self, img)


def build_gaussian_hvs(sigma: float = DEFAULT_GAUSSIAN_SIGMA,
                       radius: int = DEFAULT_GAUSSIAN_RADIUS) -> HvsFilter:
    """Truncated 2D Gaussian of side 2*radius+1, renormalized to sum 1."""
    if sigma <= 0:
        raise InvalidParam(f"sigma must be > 0, got {sigma}")
    if radius < 1:
        raise InvalidParam(f"radius must be >= 1, got {radius}")
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    g1 = np.exp(-(ax**2) / (2.0 * sigma**2))
    k = np.outer(g1, g1)
    k /= k.sum()
    return HvsFilter(k, "gaussian", {"sigma": float(sigma), "radius": int(radius)})


def build_nasanen_hvs(scale: float = DEFAULT_NASANEN_SCALE,
                      size: int = DEFAULT_NASANEN_SIZE) -> HvsFilter:
    """Spatial kernel of the Nasanen exponential CSF.

    Built by sampling the radial frequency response on a size x size DFT
    grid, inverse transforming, centering, and renormalizing to sum 1.
    The model constants are the module-level NASANEN_* values.
    """
    if scale <= 0:
        raise InvalidParam(f"scale must be > 0, got {scale}")
    if size < 3 or size % 2 == 0:
        raise InvalidParam(f"size must be odd and >= 3, got {size}")
    decay_cpd = NASANEN_C * np.log(NASANEN_LUMINANCE) + NASANEN_D
    f = np.fft.fftfreq(size)  # cycles/pixel
    fr = np.hypot(*np.meshgrid(f, f, indexing="ij"))
    f_cpd = fr * scale * np.pi / 180.0
    response = np.exp(-f_cpd / decay_cpd)
    k = np.fft.fftshift(np.fft.ifft2(response).real)
    k = 0.5 * (k + k[::-1, ::-1])  # enforce exact point symmetry
    k /= k.sum()
    return HvsFilter(k, "nasanen", {"scale": float(scale), "size": int(size)})


def apply_hvs(filt: HvsFilter, img: np.ndarray) -> np.ndarray:
    """Filter an image with mirror boundary handling; dims are preserved."""
    img = np.asarray(img, dtype=np.float64)
    return ndimage.correlate(img, filt.kernel, mode="mirror")
