"""Exception types raised across the package."""


class HalftoneError(Exception):
    """Base class for all package errors."""


class IoFailure(HalftoneError):
    """File could not be read or written."""


class MalformedHeader(HalftoneError):
    """Image file header is not a format we recognise."""


class UnsupportedBitDepth(HalftoneError):
    """Image file is valid but not 8-bit grayscale / 1-bit binary."""


class OutOfRangeGray(HalftoneError):
    """Gray level outside the accepted range."""


class InvalidParam(HalftoneError):
    """Parameter outside its documented domain."""


class DimensionMismatch(HalftoneError):
    """Operands have incompatible shapes."""


class ShapeMismatch(DimensionMismatch):
    """Parameter/gradient arrays have incompatible shapes."""


class ImageTooSmall(HalftoneError):
    """Image smaller than the metric's window."""


class MalformedTable(HalftoneError):
    """Coefficient table file does not match the documented format."""


class WeightsDontNormalize(HalftoneError):
    """Diffusion weights in a table row do not sum to 1."""


class UnknownMethod(HalftoneError):
    """Halftoning method name not recognised."""
