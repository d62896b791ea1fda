"""Blue-noise spectral analysis and the anisotropy-suppressing loss.

The power spectrum estimate is |DFT(x)|^2 / N.  Radial averaging groups
frequency bins into annular rings of width one bin (rounding the Euclidean
bin radius), with the DC bin excluded: DC carries mean tone, not texture.
Anisotropy is the normalized within-ring variance of spectral power;
well-formed blue noise sits near -10 dB.

The anisotropy-suppressing loss penalizes within-ring power deviations of
a differentiable probability map standing in for the sampled halftone, and
comes with an analytic gradient derived through the linear DFT.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import OutOfRangeGray
from .image import BinaryImage, GrayImage


@dataclass(frozen=True)
class Spectrum:
    """Power spectral estimate on the image's own frequency grid."""

    power: np.ndarray  # (height, width), >= 0, DFT bin layout (DC at [0,0])

    @property
    def height(self) -> int:
        return self.power.shape[0]

    @property
    def width(self) -> int:
        return self.power.shape[1]


@dataclass(frozen=True)
class RadialProfile:
    """Per-ring means of spectral power; ring 0 is radius-1 (DC excluded)."""

    values: np.ndarray       # mean power per ring, length num_rings
    ring_counts: np.ndarray  # bins per ring
    ring_radii: np.ndarray   # integer bin radius per ring (1, 2, ...)

    @property
    def num_rings(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class AnisotropyProfile:
    """Within-ring relative variance per ring, linear and in dB.

    Rings with fewer than 2 bins or zero mean power have no defined value;
    `defined` marks the rest.  dB values use -inf for zero variance.
    """

    linear: np.ndarray
    values_db: np.ndarray
    defined: np.ndarray


@lru_cache(maxsize=32)
def _ring_structure(height: int, width: int):
    """Ring index per bin (-1 for DC) and per-ring bin counts."""
    ky = np.fft.fftfreq(height) * height
    kx = np.fft.fftfreq(width) * width
    radius = np.hypot(*np.meshgrid(ky, kx, indexing="ij"))
    ring = np.rint(radius).astype(np.int64)
    ring[0, 0] = -1
    # radius-0 bins other than DC cannot occur; rings are 1..max
    num = int(ring.max())
    counts = np.bincount(ring[ring > 0], minlength=num + 1)[1:]
    ring_of_bin = ring - 1  # ring array index; -2 would be DC, mark as -1
    ring_of_bin[0, 0] = -1
    return ring_of_bin, counts


def _as_real_array(x) -> np.ndarray:
    if isinstance(x, GrayImage):
        return x.data
    if isinstance(x, BinaryImage):
        return x.astype_float()
    return np.asarray(x, dtype=np.float64)


def power_spectrum(x) -> Spectrum:
    """Squared DFT magnitude divided by the pixel count."""
    arr = _as_real_array(x)
    n = arr.size
    f = np.fft.fft2(arr)
    return Spectrum((f.real**2 + f.imag**2) / n)


def rapsd(s: Spectrum) -> RadialProfile:
    """Radially averaged power: ring means over annular bins, DC excluded."""
    ring, counts = _ring_structure(s.height, s.width)
    sums = np.zeros(len(counts))
    np.add.at(sums, ring[ring >= 0], s.power[ring >= 0])
    return RadialProfile(
        values=sums / counts,
        ring_counts=counts.copy(),
        ring_radii=np.arange(1, len(counts) + 1),
    )


def anisotropy(s: Spectrum, p: RadialProfile | None = None) -> AnisotropyProfile:
    """Per-ring relative variance of power: sum (P-ring mean)^2 / ((n-1) mean^2)."""
    if p is None:
        p = rapsd(s)
    ring, counts = _ring_structure(s.height, s.width)
    mask = ring >= 0
    dev = s.power[mask] - p.values[ring[mask]]
    sums = np.zeros(len(counts))
    np.add.at(sums, ring[mask], dev * dev)
    defined = (counts >= 2) & (p.values > 0)
    linear = np.full(len(counts), np.nan)
    nz = defined.nonzero()[0]
    linear[nz] = sums[nz] / ((counts[nz] - 1) * p.values[nz] ** 2)
    with np.errstate(divide="ignore"):
        db = np.where(defined & (linear > 0), 10.0 * np.log10(
            np.where(linear > 0, linear, 1.0)), -np.inf)
    db = np.where(defined, db, np.nan)
    return AnisotropyProfile(linear=linear, values_db=db, defined=defined)


def anisotropy_loss(prob_map: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared within-ring power deviation of a probability map.

    Returns (value, gradient).  The value is the mean over non-DC bins of
    (P_hat(f) - ring mean)^2 computed on the map itself; the gradient with
    respect to every map pixel is analytic.

    Because each ring's deviations sum to zero, d value / d P_hat(f) is
    simply 2 * deviation(f) / M with M the non-DC bin count, and chaining
    through P_hat = |F|^2 / N gives

        grad = (4 / M) * Re(IDFT(deviation * F)).
    """
    p = np.asarray(prob_map, dtype=np.float64)
    n = p.size
    ring, counts = _ring_structure(p.shape[0], p.shape[1])
    f = np.fft.fft2(p)
    power = (f.real**2 + f.imag**2) / n

    mask = ring >= 0
    sums = np.zeros(len(counts))
    np.add.at(sums, ring[mask], power[mask])
    ring_mean = sums / counts

    dev = np.zeros_like(power)
    dev[mask] = power[mask] - ring_mean[ring[mask]]
    m = int(mask.sum())
    value = float(np.sum(dev * dev) / m)
    grad = (4.0 / m) * np.fft.ifft2(dev * f).real
    return value, grad


def principal_frequency(g: float) -> float:
    """Blue-noise principal frequency for gray level g, in cycles/pixel."""
    if not 0.0 < g < 1.0:
        raise OutOfRangeGray(f"gray level {g} outside (0, 1)")
    return float(np.sqrt(g) if g <= 0.5 else np.sqrt(1.0 - g))


@dataclass(frozen=True)
class BlueNoiseReport:
    """Spectral diagnostics of a halftone of a constant-gray input."""

    gray: float
    gray_estimated: bool
    ring_radii: np.ndarray
    ring_freqs: np.ndarray   # cycles/pixel
    rapsd: np.ndarray
    anisotropy_db: np.ndarray
    anisotropy_defined: np.ndarray
    principal_freq: float
    low_freq_power_ratio: float


def bluenoise_report(h: BinaryImage, gray: float | None = None) -> BlueNoiseReport:
    """RAPSD + anisotropy curves, principal-frequency marker, and the
    low-frequency-power ratio (mean RAPSD below f_b/2 over peak RAPSD).

    The input should be the halftone of a constant-gray image; if `gray`
    is not given it is estimated from the dot density and flagged.
    """
    estimated = gray is None
    if estimated:
        gray = float(np.mean(h.astype_float()))
    s = power_spectrum(h)
    prof = rapsd(s)
    ani = anisotropy(s, prof)
    # frequency of ring radius rho: rho / side for square images; use the
    # geometric mean side so rectangular inputs stay monotone in rho
    side = float(np.sqrt(h.width * h.height))
    freqs = prof.ring_radii / side
    fb = principal_frequency(min(max(gray, 1e-9), 1 - 1e-9))
    low = freqs < fb / 2.0
    peak = float(prof.values.max()) if prof.num_rings else 0.0
    ratio = float(prof.values[low].mean() / peak) if low.any() and peak > 0 else 0.0
    return BlueNoiseReport(
        gray=float(gray),
        gray_estimated=estimated,
        ring_radii=prof.ring_radii,
        ring_freqs=freqs,
        rapsd=prof.values,
        anisotropy_db=ani.values_db,
        anisotropy_defined=ani.defined,
        principal_freq=fb,
        low_freq_power_ratio=ratio,
    )
