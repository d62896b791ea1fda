"""Classic halftoners: ordered dithering, error diffusion, direct binary search.

Ordered dithering thresholds against a tiled matrix; threshold matrices can
be Bayer, white noise, or blue noise built with the void-and-cluster
procedure.  Error diffusion quantizes sequentially and pushes the error to
unprocessed neighbors (serpentine by default).  Direct binary search
greedily applies toggle/swap moves that lower the HVS-filtered MSE, with
exact incremental error updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import (
    DimensionMismatch,
    InvalidParam,
    IoFailure,
    MalformedTable,
    WeightsDontNormalize,
)
from .hvs import HvsFilter, apply_hvs
from .image import BinaryImage, GrayImage
from .rng import Stream

# Strict-improvement threshold for DBS moves: guards against accepting
# roundoff-level "improvements" that could cycle forever.
DBS_IMPROVE_EPS = 1e-12


@dataclass(frozen=True)
class ThresholdMatrix:
    """Square dither array; thresholds are a permutation of
    (rank + 0.5) / side^2 over ranks 0 .. side^2 - 1."""

    thresholds: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise InvalidParam(f"threshold matrix must be square, got {t.shape}")
        side = t.shape[0]
        expect = (np.arange(side * side) + 0.5) / (side * side)
        if not np.array_equal(np.sort(t.ravel()), expect):
            raise InvalidParam("thresholds must be the (rank+0.5)/side^2 permutation")
        t = np.ascontiguousarray(t)
        t.flags.writeable = False
        object.__setattr__(self, "thresholds", t)

    @property
    def side(self) -> int:
        return self.thresholds.shape[0]

    @classmethod
    def from_ranks(cls, ranks: np.ndarray) -> "ThresholdMatrix":
        side = ranks.shape[0]
        return cls((np.asarray(ranks, dtype=np.float64) + 0.5) / (side * side))


@dataclass(frozen=True)
class DiffusionKernel:
    """Error-diffusion taps (dx, dy, weight) plus the scan mode.

    dx is measured along the scan direction, dy down the image.  Every tap
    must point at a not-yet-processed pixel: dy > 0, or dy == 0 and dx > 0.
    """

    taps: tuple[tuple[int, int, float], ...]
    serpentine: bool = True
    name: str = "custom"

    def __post_init__(self):
        total = 0.0
        for dx, dy, w in self.taps:
            if dy < 0 or (dy == 0 and dx <= 0):
                raise InvalidParam(f"tap ({dx},{dy}) points at a processed pixel")
            total += w
        if abs(total - 1.0) > 1e-12:
            raise WeightsDontNormalize(f"tap weights sum to {total}, expected 1")

    def arrays(self):
        dx = np.array([t[0] for t in self.taps], dtype=np.int64)
        dy = np.array([t[1] for t in self.taps], dtype=np.int64)
        w = np.array([t[2] for t in self.taps], dtype=np.float64)
        return dx, dy, w


FLOYD_STEINBERG = DiffusionKernel(
    taps=((1, 0, 7 / 16), (-1, 1, 3 / 16), (0, 1, 5 / 16), (1, 1, 1 / 16)),
    name="fs",
)

JARVIS = DiffusionKernel(
    taps=(
        (1, 0, 7 / 48), (2, 0, 5 / 48),
        (-2, 1, 3 / 48), (-1, 1, 5 / 48), (0, 1, 7 / 48), (1, 1, 5 / 48), (2, 1, 3 / 48),
        (-2, 2, 1 / 48), (-1, 2, 3 / 48), (0, 2, 5 / 48), (1, 2, 3 / 48), (2, 2, 1 / 48),
    ),
    name="jarvis",
)

KERNELS = {"fs": FLOYD_STEINBERG, "jarvis": JARVIS}


def bayer_matrix(side: int) -> ThresholdMatrix:
    """Recursive Bayer dither matrix; side must be a power of two."""
    if side < 2 or side & (side - 1):
        raise InvalidParam(f"Bayer side must be a power of two >= 2, got {side}")
    ranks = np.array([[0, 2], [3, 1]], dtype=np.int64)
    while ranks.shape[0] < side:
        ranks = np.block([
            [4 * ranks + 0, 4 * ranks + 2],
            [4 * ranks + 3, 4 * ranks + 1],
        ])
    return ThresholdMatrix.from_ranks(ranks)


def white_noise_matrix(side: int, seed: int) -> ThresholdMatrix:
    """Random-permutation threshold matrix (white-noise dither)."""
    ranks = Stream(seed).permutation(side * side).reshape(side, side)
    return ThresholdMatrix.from_ranks(np.argsort(ranks.ravel()).reshape(side, side))


def ordered_dither(c: GrayImage, m: ThresholdMatrix) -> BinaryImage:
    """Pixel-wise threshold against the tiled matrix: on iff c > threshold."""
    reps_y = -(-c.height // m.side)
    reps_x = -(-c.width // m.side)
    tiled = np.tile(m.thresholds, (reps_y, reps_x))[: c.height, : c.width]
    return BinaryImage((c.data > tiled).astype(np.uint8))


# ---------------------------------------------------------------------------
# Void-and-cluster mask generation
# ---------------------------------------------------------------------------

def _toroidal_filter(pattern: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return ndimage.correlate(pattern.astype(np.float64), kernel, mode="wrap")


def _tightest_cluster(field: np.ndarray, pattern: np.ndarray) -> tuple[int, int]:
    masked = np.where(pattern == 1, field, -np.inf)
    return np.unravel_index(np.argmax(masked), field.shape)


def _largest_void(field: np.ndarray, pattern: np.ndarray) -> tuple[int, int]:
    masked = np.where(pattern == 0, field, np.inf)
    return np.unravel_index(np.argmin(masked), field.shape)


def generate_vac_mask(side: int, seed: int, hvs: HvsFilter) -> ThresholdMatrix:
    """Blue-noise threshold matrix by the three-phase void-and-cluster
    procedure under toroidal filtering with the given HVS kernel.

    Deterministic given the seed.  Side must be a power of two so the
    matrix tiles seamlessly.
    """
    if side < 4 or side & (side - 1):
        raise InvalidParam(f"side must be a power of two >= 4, got {side}")
    n = side * side
    kernel = hvs.kernel
    ones_target = max(1, n // 10)

    # seeded initial pattern: the ones_target cells with smallest keys
    keys = Stream(seed).uniform(n)
    pattern = np.zeros((side, side), dtype=np.int64)
    pattern.ravel()[np.argsort(keys, kind="stable")[:ones_target]] = 1

    field = _toroidal_filter(pattern, kernel)

    def move(pos, delta):
        pattern[pos] = pattern[pos] + delta
        y, x = pos
        ky = (np.arange(kernel.shape[0]) - kernel.shape[0] // 2 + y) % side
        kx = (np.arange(kernel.shape[1]) - kernel.shape[1] // 2 + x) % side
        field[np.ix_(ky, kx)] += delta * kernel

    # relaxation: move tightest-cluster dot into largest void until the
    # removed dot would go straight back
    while True:
        cluster = _tightest_cluster(field, pattern)
        move(cluster, -1)
        void = _largest_void(field, pattern)
        if void == cluster:
            move(cluster, +1)
            break
        move(void, +1)

    prototype = pattern.copy()
    ranks = np.full((side, side), -1, dtype=np.int64)

    # phase 1: rank the prototype dots by removing tightest clusters
    count = int(pattern.sum())
    while count > 0:
        cluster = _tightest_cluster(field, pattern)
        move(cluster, -1)
        count -= 1
        ranks[cluster] = count

    # phases 2+3: refill from the prototype, always inserting into the
    # largest void of the current pattern
    pattern = prototype.copy()
    field = _toroidal_filter(pattern, kernel)
    count = int(pattern.sum())
    while count < n:
        void = _largest_void(field, pattern)
        move(void, +1)
        ranks[void] = count
        count += 1

    return ThresholdMatrix.from_ranks(ranks)


def save_mask(m: ThresholdMatrix, path) -> None:
    """Plain-text mask format: 'vacmask SIDE' then SIDE rows of ranks."""
    ranks = np.rint(m.thresholds * m.side * m.side - 0.5).astype(np.int64)
    try:
        with open(path, "w") as fh:
            fh.write(f"vacmask {m.side}\n")
            for row in ranks:
                fh.write(" ".join(str(v) for v in row) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_mask(path) -> ThresholdMatrix:
    try:
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2 or header[0] != "vacmask":
                raise MalformedTable(f"{path}: missing 'vacmask SIDE' header")
            side = int(header[1])
            ranks = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise MalformedTable(f"{path}: bad rank data: {exc}") from exc
    if ranks.shape != (side, side):
        raise MalformedTable(f"{path}: expected {side}x{side} ranks, got {ranks.shape}")
    return ThresholdMatrix.from_ranks(ranks)


# ---------------------------------------------------------------------------
# Error diffusion
# ---------------------------------------------------------------------------

def error_diffusion(c: GrayImage, k: DiffusionKernel) -> BinaryImage:
    """Sequential error diffusion; serpentine scan if the kernel says so."""
    dx, dy, w = k.arrays()
    out = _kernels.error_diffusion_scan(c.data, dx, dy, w, k.serpentine)
    return BinaryImage(out)


# Variable-coefficient mode uses the three-tap layout right / down-left /
# down, one weight row per 8-bit input level.
VARIABLE_TAPS = ((1, 0), (-1, 1), (0, 1))


@dataclass(frozen=True)
class VariableKernelTable:
    weights: np.ndarray  # (256, 3)
    serpentine: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (256, 3):
            raise MalformedTable(f"expected (256, 3) weights, got {w.shape}")
        w = np.ascontiguousarray(w)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


def load_variable_kernel_table(path, serpentine: bool = True) -> VariableKernelTable:
    """Read a 'level w1 w2 w3' table with one row per level 0..255.

    Weights in each row must sum to 1 within 1e-6.
    """
    try:
        with open(path) as fh:
            lines = [ln.split("#")[0].strip() for ln in fh]
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    rows: dict[int, tuple[float, float, float]] = {}
    for ln in lines:
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 4:
            raise MalformedTable(f"{path}: expected 'level w1 w2 w3', got {ln!r}")
        try:
            level = int(parts[0])
            w = tuple(float(p) for p in parts[1:])
        except ValueError as exc:
            raise MalformedTable(f"{path}: bad row {ln!r}") from exc
        if not 0 <= level <= 255 or level in rows:
            raise MalformedTable(f"{path}: bad or duplicate level {level}")
        rows[level] = w
    if len(rows) != 256:
        missing = sorted(set(range(256)) - set(rows))[:4]
        raise MalformedTable(f"{path}: missing levels (first few: {missing})")
    table = np.array([rows[i] for i in range(256)], dtype=np.float64)
    sums = table.sum(axis=1)
    bad = np.where(np.abs(sums - 1.0) > 1e-6)[0]
    if bad.size:
        raise WeightsDontNormalize(
            f"{path}: level {bad[0]} weights sum to {sums[bad[0]]:.6f}")
    return VariableKernelTable(table, serpentine=serpentine)


def error_diffusion_variable(c: GrayImage, table: VariableKernelTable) -> BinaryImage:
    """Error diffusion with weights selected by each pixel's original level."""
    levels = np.rint(c.data * 255.0).astype(np.int64)
    dx = np.array([t[0] for t in VARIABLE_TAPS], dtype=np.int64)
    dy = np.array([t[1] for t in VARIABLE_TAPS], dtype=np.int64)
    out = _kernels.error_diffusion_variable(
        c.data, levels, table.weights, dx, dy, table.serpentine)
    return BinaryImage(out)


# ---------------------------------------------------------------------------
# Direct binary search
# ---------------------------------------------------------------------------

def white_noise_threshold(c: GrayImage, seed: int) -> BinaryImage:
    """Threshold against i.i.d. uniform noise; the default DBS start."""
    u = Stream(seed).uniform(c.width * c.height).reshape(c.height, c.width)
    return BinaryImage((c.data > u).astype(np.uint8))


def dbs(c: GrayImage, init: BinaryImage, hvs: HvsFilter,
        max_sweeps: int = 10) -> BinaryImage:
    """Greedy direct binary search minimizing MSE(G(h), G(c)).

    Raster sweeps evaluate a toggle plus swaps with the 8 neighbors at
    every pixel and apply whichever move lowers the error most; incremental
    updates are exact for mirror boundaries.  Stops when a sweep accepts no
    move or after max_sweeps.
    """
    if init.data.shape != c.data.shape:
        raise DimensionMismatch(f"init {init.data.shape} vs image {c.data.shape}")
    h = init.data.copy()
    e = apply_hvs(hvs, h.astype(np.float64)) - apply_hvs(hvs, c.data)
    r = hvs.radius
    cy, cyn = _kernels.mirror_copies(c.height, r)
    cx, cxn = _kernels.mirror_copies(c.width, r)
    for _ in range(max_sweeps):
        moves = _kernels.dbs_sweep(h, e, hvs.kernel, r, cy, cyn, cx, cxn,
                                   DBS_IMPROVE_EPS)
        if moves == 0:
            break
    return BinaryImage(h)
