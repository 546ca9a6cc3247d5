"""Pixel-level primitives shared by both processing chains.

All operations are pure: they take an Image and return a new one, never
mutating inputs. Re-quantization to 8 bits uses round-half-up
(floor(x + 0.5)) followed by clamping to [0, 255], applied consistently
across the module so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import ImageError
from .image import Image, Kernel, SignedImage, StructuringElement

# 4-neighbor Laplacian mask; sharpening adds the negated response so that
# bright peaks brighten and their surroundings darken.
LAPLACIAN_KERNEL = Kernel(np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64))

DEFAULT_ROI_MARGIN = 8


class Rect(NamedTuple):
    x: int
    y: int
    w: int
    h: int


def _quantize(values: np.ndarray) -> np.ndarray:
    """Round half up and clamp to the displayable range."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def _require_gray(img: Image, op: str) -> np.ndarray:
    if img.channels != 1:
        raise ImageError(f"{op} requires a 1-channel image, got {img.channels} channels")
    return img.pixels


def to_grayscale(img: Image) -> Image:
    """BT.601 luma conversion; 1-channel input is returned unchanged."""
    if img.channels == 1:
        return img
    rgb = img.pixels.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return Image(_quantize(luma))


def normalize_stretch(img: Image) -> Image:
    """Min-max stretch to the full [0, 255] range; constant images pass through."""
    a = _require_gray(img, "normalize_stretch")
    lo = int(a.min())
    hi = int(a.max())
    if hi == lo:
        return img
    out = 255.0 * (a.astype(np.float64) - lo) / (hi - lo)
    return Image(_quantize(out))


def normalize_unit(img: Image) -> np.ndarray:
    """Exact v/255 scaling to a float raster in [0, 1] (model-ingest form)."""
    return img.pixels.astype(np.float64) / 255.0


def photometric_adjust(img: Image, mode: str, param) -> Image:
    """Contrast, brightness or per-channel color gain adjustment.

    contrast: param is a factor > 0, pixels pivot around 128.
    brightness: param is a signed offset added to every value.
    color: param is an (r, g, b) gain triple; requires a 3-channel image.
    """
    a = img.pixels.astype(np.float64)
    if mode == "contrast":
        f = float(param)
        if f <= 0:
            raise ImageError(f"contrast factor must be > 0, got {f}")
        return Image(_quantize(128.0 + f * (a - 128.0)))
    if mode == "brightness":
        return Image(_quantize(a + float(param)))
    if mode == "color":
        if img.channels != 3:
            raise ImageError("color adjustment requires a 3-channel image")
        gains = np.asarray(param, dtype=np.float64)
        if gains.shape != (3,):
            raise ImageError(f"color gains must be 3 values, got {param!r}")
        return Image(_quantize(a * gains))
    raise ImageError(f"unknown photometric mode {mode!r}")


def convolve(img: Image, kernel: Kernel) -> SignedImage:
    """Correlation with replicate-edge padding; the response is not clamped."""
    a = _require_gray(img, "convolve").astype(np.float64)
    k = kernel.coefficients
    r = kernel.size // 2
    padded = np.pad(a, r, mode="edge")
    out = np.zeros_like(a)
    for dy in range(kernel.size):
        for dx in range(kernel.size):
            c = k[dy, dx]
            if c != 0.0:
                out += c * padded[dy : dy + a.shape[0], dx : dx + a.shape[1]]
    return SignedImage(out)


def laplacian(img: Image) -> Image:
    """4-neighbor Laplacian, re-quantized as |response| for display."""
    resp = convolve(img, LAPLACIAN_KERNEL).data
    return Image(_quantize(np.abs(resp)))


def sharpen(img: Image, amount: float) -> Image:
    """Edge enhancement: subtracts amount x Laplacian response per pixel.

    Flat regions are fixed points; a bright peak gains (clamped at 255)
    while its 4-neighbors lose (clamped at 0).
    """
    if amount <= 0:
        raise ImageError(f"sharpen amount must be > 0, got {amount}")
    a = _require_gray(img, "sharpen").astype(np.float64)
    resp = convolve(img, LAPLACIAN_KERNEL).data
    return Image(_quantize(a - float(amount) * resp))


def clahe(img: Image, clip_limit: float | None = 2.0, tiles: tuple[int, int] = (8, 8)) -> Image:
    """Contrast-limited adaptive histogram equalization.

    The image is divided into a tiles=(tx, ty) grid. Each tile gets a
    256-bin histogram, clipped at clip_limit multiples of the uniform bin
    height (tile_pixels/256) with the excess redistributed uniformly in a
    single pass, then a round(255*cdf(v)) mapping. Output pixels blend the
    four surrounding tile mappings bilinearly, replicating edge tiles.
    clip_limit=None (or inf) disables clipping.
    """
    a = _require_gray(img, "clahe")
    h, w = a.shape
    tx, ty = int(tiles[0]), int(tiles[1])
    if tx < 1 or ty < 1:
        raise ImageError(f"tile grid must be >= (1, 1), got {tiles}")
    if tx > w or ty > h:
        raise ImageError(f"tile grid {tiles} exceeds image dimensions {w}x{h}")
    if clip_limit is not None and clip_limit < 1.0:
        raise ImageError(f"clip limit must be >= 1, got {clip_limit}")

    x_edges = [(i * w) // tx for i in range(tx + 1)]
    y_edges = [(i * h) // ty for i in range(ty + 1)]

    maps = np.empty((ty, tx, 256), dtype=np.float64)
    centers_y = np.empty(ty)
    centers_x = np.empty(tx)
    for r in range(ty):
        y0, y1 = y_edges[r], y_edges[r + 1]
        centers_y[r] = (y0 + y1 - 1) / 2.0
        for c in range(tx):
            x0, x1 = x_edges[c], x_edges[c + 1]
            centers_x[c] = (x0 + x1 - 1) / 2.0
            tile = a[y0:y1, x0:x1]
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
            npix = float(tile.size)
            if clip_limit is not None and math.isfinite(clip_limit):
                cap = clip_limit * npix / 256.0
                excess = np.maximum(hist - cap, 0.0).sum()
                hist = np.minimum(hist, cap) + excess / 256.0
            cdf = np.cumsum(hist) / npix
            maps[r, c] = np.floor(255.0 * cdf + 0.5)

    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    r1 = np.searchsorted(centers_y, ys, side="left")
    c1 = np.searchsorted(centers_x, xs, side="left")
    r0 = np.clip(r1 - 1, 0, ty - 1)
    c0 = np.clip(c1 - 1, 0, tx - 1)
    r1 = np.clip(r1, 0, ty - 1)
    c1 = np.clip(c1, 0, tx - 1)
    span_y = centers_y[r1] - centers_y[r0]
    span_x = centers_x[c1] - centers_x[c0]
    wy = np.where(span_y > 0, (ys - centers_y[r0]) / np.where(span_y > 0, span_y, 1.0), 0.0)
    wx = np.where(span_x > 0, (xs - centers_x[c0]) / np.where(span_x > 0, span_x, 1.0), 0.0)

    r0g, r1g = r0[:, None], r1[:, None]
    c0g, c1g = c0[None, :], c1[None, :]
    m00 = maps[r0g, c0g, a]
    m01 = maps[r0g, c1g, a]
    m10 = maps[r1g, c0g, a]
    m11 = maps[r1g, c1g, a]
    wyg, wxg = wy[:, None], wx[None, :]
    blended = (
        (1.0 - wyg) * ((1.0 - wxg) * m00 + wxg * m01)
        + wyg * ((1.0 - wxg) * m10 + wxg * m11)
    )
    return Image(_quantize(blended))


def threshold_otsu(img: Image) -> tuple[Image, int]:
    """Binarize at the threshold maximizing between-class variance.

    Scans all 256 candidate thresholds; ties pick the smallest t. The
    comparison uses the exact rational form (s0*w1 - s1*w0)^2 / (w0*w1)
    in integer arithmetic, so the winner is never a float-rounding artifact.
    Constant images return that value as t and an all-zero image.
    """
    a = _require_gray(img, "threshold_otsu")
    hist = np.bincount(a.ravel(), minlength=256)
    counts = [int(x) for x in hist]
    total = a.size
    total_sum = sum(i * c for i, c in enumerate(counts))

    best_t = -1
    best_num = 0  # variance numerator at best_t
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(256):
        w0 += counts[t]
        s0 += t * counts[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        s1 = total_sum - s0
        num = (s0 * w1 - s1 * w0) ** 2
        den = w0 * w1
        # exact cross-multiplied comparison: num/den > best_num/best_den
        if best_t < 0 or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den

    if best_t < 0 or best_num == 0:
        t = int(a.min())  # constant image
    else:
        t = best_t
    out = np.where(a > t, 255, 0).astype(np.uint8)
    return Image(out), t


def invert(img: Image) -> Image:
    """Per-value 255 - v; an involution on any image."""
    return Image((255 - img.pixels.astype(np.int16)).astype(np.uint8))


def dilate(img: Image, se: StructuringElement | None = None, iterations: int = 1) -> Image:
    """Grayscale dilation: neighborhood maximum, out-of-bounds reads as 0."""
    a = _require_gray(img, "dilate")
    if se is None:
        se = StructuringElement.square(3)
    if iterations < 1:
        raise ImageError(f"iterations must be >= 1, got {iterations}")
    h, w = a.shape
    r = se.size // 2
    offsets = np.argwhere(se.mask) - r
    cur = a
    for _ in range(iterations):
        padded = np.zeros((h + 2 * r, w + 2 * r), dtype=np.uint8)
        padded[r : r + h, r : r + w] = cur
        out = np.zeros_like(cur)
        for dy, dx in offsets:
            np.maximum(out, padded[r + dy : r + dy + h, r + dx : r + dx + w], out=out)
        cur = out
    return Image(cur)


def crop(img: Image, rect: Rect) -> Image:
    """Exact sub-raster copy; the rect must lie fully inside the image."""
    x, y, w, h = rect
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise ImageError(
            f"crop rect {tuple(rect)} out of bounds for {img.width}x{img.height} image"
        )
    return Image(img.pixels[y : y + h, x : x + w].copy())


def roi_from_mask(mask: Image, margin: int = DEFAULT_ROI_MARGIN) -> Rect:
    """Tight bounding box of nonzero pixels grown by margin, clamped to bounds.

    An all-zero mask yields the full-image rect.
    """
    a = _require_gray(mask, "roi_from_mask")
    if margin < 0:
        raise ImageError(f"margin must be >= 0, got {margin}")
    rows = np.any(a > 0, axis=1)
    cols = np.any(a > 0, axis=0)
    if not rows.any():
        return Rect(0, 0, mask.width, mask.height)
    y0, y1 = int(np.argmax(rows)), int(len(rows) - np.argmax(rows[::-1]) - 1)
    x0, x1 = int(np.argmax(cols)), int(len(cols) - np.argmax(cols[::-1]) - 1)
    x0 = max(0, x0 - margin)
    y0 = max(0, y0 - margin)
    x1 = min(mask.width - 1, x1 + margin)
    y1 = min(mask.height - 1, y1 + margin)
    return Rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def resize_bilinear(img: Image, width: int, height: int) -> Image:
    """Bilinear resize with half-pixel-center mapping.

    Resizing to the current size is a byte-exact identity.
    """
    if width < 1 or height < 1:
        raise ImageError(f"target size must be >= 1, got {width}x{height}")
    src = img.pixels.astype(np.float64)
    sh, sw = img.height, img.width

    xs = (np.arange(width, dtype=np.float64) + 0.5) * (sw / width) - 0.5
    ys = (np.arange(height, dtype=np.float64) + 0.5) * (sh / height) - 0.5
    xs = np.clip(xs, 0.0, sw - 1.0)
    ys = np.clip(ys, 0.0, sh - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)
    fx = xs - x0
    fy = ys - y0

    if img.channels == 3:
        fx = fx[None, :, None]
        fy = fy[:, None, None]
        tl = src[y0[:, None], x0[None, :], :]
        tr = src[y0[:, None], x1[None, :], :]
        bl = src[y1[:, None], x0[None, :], :]
        br = src[y1[:, None], x1[None, :], :]
    else:
        fx = fx[None, :]
        fy = fy[:, None]
        tl = src[y0[:, None], x0[None, :]]
        tr = src[y0[:, None], x1[None, :]]
        bl = src[y1[:, None], x0[None, :]]
        br = src[y1[:, None], x1[None, :]]

    top = tl + (tr - tl) * fx
    bot = bl + (br - bl) * fx
    return Image(_quantize(top + (bot - top) * fy))
