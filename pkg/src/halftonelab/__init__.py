"""Halftoning engine: continuous-tone to binary image conversion.

Provides a policy-gradient halftoner trained with counterfactual per-pixel
rewards and an anisotropy-suppressing spectral loss, classic baselines
(ordered dithering with void-and-cluster masks, error diffusion, direct
binary search), HVS-filtered quality metrics, and a blue-noise analysis
suite.
"""

__version__ = "0.1.0"

from .image import (  # noqa: F401
    BinaryImage,
    GrayImage,
    NoiseMap,
    constant_image,
    load_binary,
    load_gray,
    sample_noise,
    save_binary,
    save_gray,
)
