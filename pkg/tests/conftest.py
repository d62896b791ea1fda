import numpy as np
import pytest

from halftonelab.hvs import build_gaussian_hvs
from halftonelab.image import GrayImage


@pytest.fixture(scope="session")
def gauss_hvs():
    return build_gaussian_hvs(2.0, 6)


@pytest.fixture(scope="session")
def smooth_image():
    """Deterministic smooth 64x64 test image away from 0/1 saturation."""
    from halftonelab.corpus import synthetic_gray

    return synthetic_gray(64, 64, seed=12, kind="smooth")


def random_gray(shape, seed, lo=0.05, hi=0.95) -> GrayImage:
    rng = np.random.default_rng(seed)
    return GrayImage(rng.uniform(lo, hi, size=shape))
