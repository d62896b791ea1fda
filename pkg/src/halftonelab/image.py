"""Image containers and file I/O.

Pixels live in the normalized [0, 1] domain internally; 8-bit quantization
happens only at file boundaries.  PGM (P5, maxval 255) and PBM (P4) are the
canonical bit-exact formats; 8-bit grayscale PNG is supported for
convenience through Pillow.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    IoFailure,
    MalformedHeader,
    OutOfRangeGray,
    UnsupportedBitDepth,
)
from .rng import Stream


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Continuous-tone image, values in [0, 1], row-major (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise DimensionMismatch(f"expected 2D image, got shape {d.shape}")
        if not np.isfinite(d).all() or d.min() < 0.0 or d.max() > 1.0:
            raise OutOfRangeGray("gray values must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class BinaryImage:
    """Halftone image, values exactly 0 or 1, row-major (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise DimensionMismatch(f"expected 2D image, got shape {d.shape}")
        if not np.isin(d, (0, 1)).all():
            raise OutOfRangeGray("binary values must be exactly 0 or 1")
        object.__setattr__(self, "data", _frozen(d.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def astype_float(self) -> np.ndarray:
        return self.data.astype(np.float64)


@dataclass(frozen=True)
class NoiseMap:
    """Standard-normal noise field, reproducible from (width, height, seed)."""

    data: np.ndarray
    seed: int = field(default=0)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise DimensionMismatch(f"expected 2D noise map, got shape {d.shape}")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def sample_noise(width: int, height: int, seed: int) -> NoiseMap:
    """I.i.d. standard-normal noise map from the counter-based generator.

    Pure function of (width, height, seed): the same arguments always give
    bit-identical maps (see rng module for the exact generator spec).
    """
    if width < 1 or height < 1:
        raise DimensionMismatch("noise map dimensions must be >= 1")
    z = Stream(seed).normal(width * height)
    return NoiseMap(z.reshape(height, width), seed=seed)


def constant_image(width: int, height: int, g: float) -> GrayImage:
    """Image with every pixel equal to gray level g in [0, 1]."""
    if not 0.0 <= g <= 1.0:
        raise OutOfRangeGray(f"gray level {g} outside [0, 1]")
    return GrayImage(np.full((height, width), float(g)))


# ---------------------------------------------------------------------------
# Netpbm parsing helpers
# ---------------------------------------------------------------------------

def _read_pnm_tokens(buf: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace/comment separated ASCII integers.

    Returns (values, offset just past the single whitespace byte that
    terminates the last token), per the Netpbm header grammar.
    """
    tokens: list[int] = []
    i = 0
    n = len(buf)
    while len(tokens) < count:
        while i < n and buf[i : i + 1].isspace():
            i += 1
        if i < n and buf[i] == ord("#"):
            while i < n and buf[i] != ord("\n"):
                i += 1
            continue
        j = i
        while j < n and not buf[j : j + 1].isspace():
            j += 1
        if i == j:
            raise MalformedHeader("truncated Netpbm header")
        try:
            tokens.append(int(buf[i:j]))
        except ValueError as exc:
            raise MalformedHeader(f"bad header token {buf[i:j]!r}") from exc
        i = j
    if i >= n or not buf[i : i + 1].isspace():
        raise MalformedHeader("missing whitespace after Netpbm header")
    return tokens, i + 1


def _load_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _save_bytes(path, payload: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_gray(path) -> GrayImage:
    """Load an 8-bit grayscale image (PGM P5 or grayscale PNG).

    Pixel p maps to p/255 exactly.
    """
    raw = _load_bytes(path)
    if raw[:2] == b"P5":
        (w, h, maxval), off = _read_pnm_tokens(raw[2:], 3)
        off += 2
        if maxval != 255:
            raise UnsupportedBitDepth(f"PGM maxval {maxval}, only 255 supported")
        if w < 1 or h < 1:
            raise MalformedHeader(f"bad PGM dimensions {w}x{h}")
        pix = np.frombuffer(raw, dtype=np.uint8, offset=off)
        if pix.size < w * h:
            raise MalformedHeader("PGM pixel data truncated")
        return GrayImage(pix[: w * h].reshape(h, w) / 255.0)
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return GrayImage(_png_to_array(raw, path) / 255.0)
    raise MalformedHeader(f"{path}: not a PGM (P5) or PNG file")


def _png_to_array(raw: bytes, path) -> np.ndarray:
    from PIL import Image as PILImage

    try:
        img = PILImage.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise MalformedHeader(f"{path}: broken PNG: {exc}") from exc
    if img.mode == "1":
        img = img.convert("L")
    if img.mode != "L":
        raise UnsupportedBitDepth(f"{path}: PNG mode {img.mode}, need 8-bit grayscale")
    return np.asarray(img, dtype=np.uint8)


def save_gray(img: GrayImage, path) -> None:
    """Write a GrayImage as PGM (P5) or PNG; values round to 8 bits."""
    q = np.rint(img.data * 255.0).astype(np.uint8)
    if str(path).lower().endswith(".png"):
        _save_png_l(q, path)
        return
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    _save_bytes(path, header + q.tobytes())


def save_binary(img: BinaryImage, path) -> None:
    """Write a BinaryImage as PBM (P4) or PNG; 0 is black, 1 is white.

    Round-trips losslessly with load_binary.
    """
    if str(path).lower().endswith(".png"):
        _save_png_l(img.data * np.uint8(255), path)
        return
    # PBM stores 1 = black, so white pixels (our 1) become 0 bits.
    bits = np.packbits(1 - img.data, axis=1)
    header = f"P4\n{img.width} {img.height}\n".encode("ascii")
    _save_bytes(path, header + bits.tobytes())


def load_binary(path) -> BinaryImage:
    """Load a PBM (P4) or binary PNG halftone."""
    raw = _load_bytes(path)
    if raw[:2] == b"P4":
        (w, h), off = _read_pnm_tokens(raw[2:], 2)
        off += 2
        row_bytes = (w + 7) // 8
        pix = np.frombuffer(raw, dtype=np.uint8, offset=off)
        if pix.size < row_bytes * h:
            raise MalformedHeader("PBM pixel data truncated")
        bits = np.unpackbits(pix[: row_bytes * h].reshape(h, row_bytes), axis=1)
        return BinaryImage(1 - bits[:, :w])
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        arr = _png_to_array(raw, path)
        if not np.isin(arr, (0, 255)).all():
            raise UnsupportedBitDepth(f"{path}: PNG has non-binary pixel values")
        return BinaryImage((arr == 255).astype(np.uint8))
    raise MalformedHeader(f"{path}: not a PBM (P4) or PNG file")


def _save_png_l(arr: np.ndarray, path) -> None:
    from PIL import Image as PILImage

    try:
        PILImage.fromarray(arr, mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
