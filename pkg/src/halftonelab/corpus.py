"""Deterministic synthetic test images.

Small natural-image stand-ins for fixtures, benchmarks and desk-scale
training: smooth random fields, ramps, soft blobs, and mixtures.  Pixel
values are kept inside [0.05, 0.95] so halftones of every kind stay
non-trivial.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import InvalidParam
from .image import GrayImage
from .rng import Stream

KINDS = ("smooth", "ramp", "blobs", "mix")


def _rescale(a: np.ndarray, lo: float = 0.05, hi: float = 0.95) -> np.ndarray:
    amin, amax = a.min(), a.max()
    if amax - amin < 1e-12:
        return np.full_like(a, 0.5)
    return lo + (hi - lo) * (a - amin) / (amax - amin)


def synthetic_gray(width: int, height: int, seed: int,
                   kind: str = "smooth") -> GrayImage:
    if kind not in KINDS:
        raise InvalidParam(f"unknown corpus kind {kind!r}, have {KINDS}")
    stream = Stream(seed)
    if kind == "smooth":
        field = stream.normal(width * height).reshape(height, width)
        a = ndimage.gaussian_filter(field, sigma=min(width, height) / 12.0,
                                    mode="mirror")
    elif kind == "ramp":
        x = np.linspace(0.0, 1.0, width)
        tilt = 0.2 * float(stream.uniform(1)[0])
        y = np.linspace(0.0, tilt, height)
        a = x[None, :] + y[:, None]
    elif kind == "blobs":
        a = np.zeros((height, width))
        yy, xx = np.mgrid[0:height, 0:width]
        nblobs = 4 + int(stream.integers(1, 4)[0])
        for _ in range(nblobs):
            cx = float(stream.uniform(1)[0]) * width
            cy = float(stream.uniform(1)[0]) * height
            s = (0.05 + 0.15 * float(stream.uniform(1)[0])) * min(width, height)
            amp = -1.0 + 2.0 * float(stream.uniform(1)[0])
            a += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
    else:  # mix: smooth field over a ramp
        base = synthetic_gray(width, height, seed * 2 + 1, "smooth").data
        x = np.linspace(0.0, 1.0, width)
        a = 0.6 * base + 0.4 * x[None, :]
    return GrayImage(_rescale(a))


def synthetic_corpus(count: int, size: int, seed: int) -> list[GrayImage]:
    """`count` deterministic images of size x size, cycling through kinds."""
    return [
        synthetic_gray(size, size, seed + 101 * i, KINDS[i % len(KINDS)])
        for i in range(count)
    ]


def write_corpus(directory, count: int, size: int, seed: int) -> list[str]:
    """Write a synthetic corpus as PGM files; returns the file paths."""
    import os

    from .image import save_gray

    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, img in enumerate(synthetic_corpus(count, size, seed)):
        path = os.path.join(directory, f"fixture_{i:03d}.pgm")
        save_gray(img, path)
        paths.append(path)
    return paths
