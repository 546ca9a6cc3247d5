"""Raster containers and PNG/BMP I/O.

An Image wraps an immutable uint8 numpy array, either (h, w) grayscale or
(h, w, 3) RGB. SignedImage carries unclamped float filter responses.
Arrays are frozen (writeable=False) so values can be shared across threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as _PILImage

from .errors import ImageError

_SUPPORTED_EXT = {".png", ".bmp"}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Image:
    """8-bit raster, row-major, 1 or 3 channels."""

    pixels: np.ndarray

    def __post_init__(self):
        a = self.pixels
        if not isinstance(a, np.ndarray) or a.dtype != np.uint8:
            raise ImageError("image data must be a uint8 numpy array")
        if a.ndim == 2:
            pass
        elif a.ndim == 3 and a.shape[2] == 3:
            pass
        else:
            raise ImageError(f"image shape must be (h, w) or (h, w, 3), got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ImageError(f"image dimensions must be >= 1, got {a.shape}")
        object.__setattr__(self, "pixels", _freeze(a))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True)
class SignedImage:
    """Single-channel real-valued filter response (unclamped)."""

    data: np.ndarray

    def __post_init__(self):
        a = self.data
        if not isinstance(a, np.ndarray) or a.ndim != 2:
            raise ImageError("signed image data must be a 2-D numpy array")
        object.__setattr__(self, "data", _freeze(a.astype(np.float64)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Kernel:
    """Odd-sized square convolution mask."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ImageError(f"kernel must be square, got shape {c.shape}")
        if c.shape[0] % 2 != 1:
            raise ImageError(f"kernel size must be odd, got {c.shape[0]}")
        object.__setattr__(self, "coefficients", _freeze(c))

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]


@dataclass(frozen=True)
class StructuringElement:
    """Odd-sized boolean neighborhood mask, origin at the center cell."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ImageError(f"structuring element must be square, got {m.shape}")
        if m.shape[0] % 2 != 1:
            raise ImageError(f"structuring element size must be odd, got {m.shape[0]}")
        if not m[m.shape[0] // 2, m.shape[1] // 2]:
            raise ImageError("structuring element origin cell must be set")
        object.__setattr__(self, "mask", _freeze(m))

    @property
    def size(self) -> int:
        return self.mask.shape[0]

    @classmethod
    def square(cls, size: int = 3) -> "StructuringElement":
        return cls(np.ones((size, size), dtype=bool))

    @classmethod
    def cross(cls, size: int = 3) -> "StructuringElement":
        m = np.zeros((size, size), dtype=bool)
        m[size // 2, :] = True
        m[:, size // 2] = True
        return cls(m)


def image_from_array(arr: np.ndarray) -> Image:
    """Build an Image from any integer/float array already in [0, 255]."""
    a = np.asarray(arr)
    if a.dtype != np.uint8:
        if np.any((a < 0) | (a > 255)):
            raise ImageError("array values outside [0, 255]")
        a = a.astype(np.uint8)
    return Image(a)


def load_image(path: str | os.PathLike) -> Image:
    """Read a PNG or BMP file as grayscale or RGB."""
    try:
        with _PILImage.open(path) as im:
            if im.format not in ("PNG", "BMP"):
                raise ImageError(f"{path}: unsupported format {im.format!r} (PNG/BMP only)")
            if im.mode in ("L", "RGB"):
                pass
            elif im.mode in ("1", "LA", "I;16", "I"):
                im = im.convert("L")
            elif im.mode in ("P", "RGBA", "CMYK"):
                im = im.convert("RGB")
            else:
                raise ImageError(f"{path}: unsupported image mode {im.mode!r}")
            return Image(np.asarray(im, dtype=np.uint8))
    except FileNotFoundError:
        raise ImageError(f"{path}: no such file") from None
    except _PILImage.UnidentifiedImageError:
        raise ImageError(f"{path}: not a readable image file") from None


def save_image(img: Image, path: str | os.PathLike) -> None:
    """Write an Image as PNG or BMP, decided by the file extension."""
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext not in _SUPPORTED_EXT:
        raise ImageError(f"{path}: unsupported extension {ext!r} (use .png or .bmp)")
    mode = "L" if img.channels == 1 else "RGB"
    _PILImage.fromarray(np.asarray(img.pixels), mode=mode).save(path)
