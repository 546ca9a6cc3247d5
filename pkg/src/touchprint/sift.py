"""Scale-space keypoint detection and 128-dim descriptor extraction.

Difference-of-Gaussian extrema with quadratic subpixel refinement,
contrast and edge-response rejection, 36-bin dominant-orientation
assignment, and 4x4x8 trilinearly-binned gradient descriptors
(L2-normalized, clipped at 0.2, renormalized).

The pyramid starts at input resolution (no initial 2x upsampling octave;
set SiftParams.upsample_first to enable it). Angles use image coordinates
with y growing downward throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ImageError
from .image import Image

# capture blur assumed for the input raster when seeding the pyramid
_ASSUMED_BLUR = 0.5
# DoG pixels this close to an octave border are never candidates
_BORDER = 5
# orientation histogram
_ORI_BINS = 36
_ORI_SIGMA_FACTOR = 1.5
_ORI_RADIUS_FACTOR = 3.0
_ORI_PEAK_RATIO = 0.8
# descriptor geometry
_DESC_GRID = 4
_DESC_ORI_BINS = 8
_DESC_SCALE_FACTOR = 3.0
_DESC_CLIP = 0.2

MIN_IMAGE_SIDE = 16


@dataclass(frozen=True)
class SiftParams:
    scales_per_octave: int = 3
    sigma0: float = 1.6
    contrast_threshold: float = 0.03
    edge_ratio_threshold: float = 10.0
    octaves: int | None = None  # None: floor(log2(min(w, h))) - 3, at least 1
    upsample_first: bool = False

    def __post_init__(self):
        if self.scales_per_octave < 1:
            raise ImageError("scales_per_octave must be >= 1")
        if self.sigma0 <= 0 or self.contrast_threshold <= 0 or self.edge_ratio_threshold <= 0:
            raise ImageError("sift thresholds must be > 0")
        if self.octaves is not None and self.octaves < 1:
            raise ImageError("octave count must be >= 1")


@dataclass(frozen=True)
class Keypoint:
    """Scale-space extremum in base-image coordinates.

    octave/layer record where in the pyramid the point was found so the
    descriptor stage can revisit the right Gaussian level.
    """

    x: float
    y: float
    scale: float
    orientation: float = 0.0
    response: float = 0.0
    octave: int = 0
    layer: float = 1.0


@dataclass
class ScaleSpace:
    gaussians: list[list[np.ndarray]]
    dogs: list[list[np.ndarray]]
    params: SiftParams
    width: int
    height: int


def _gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(4.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()

def _blur(a: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return a.copy()
    k = _gaussian_kernel1d(sigma)
    r = len(k) // 2
    p = np.pad(a, ((0, 0), (r, r)), mode="edge")
    v = np.lib.stride_tricks.sliding_window_view(p, len(k), axis=1)
    a = v @ k
    p = np.pad(a, ((r, r), (0, 0)), mode="edge")
    v = np.lib.stride_tricks.sliding_window_view(p, len(k), axis=0)
    return v @ k

def _upsample2(a: np.ndarray) -> np.ndarray:
    h, w = a.shape
    out = np.empty((2 * h, 2 * w), dtype=a.dtype)
    out[::2, ::2] = a
    out[1::2, ::2] = np.vstack([0.5 * (a[:-1] + a[1:]), a[-1:]])
    out[:, 1::2] = 0.5 * (out[:, ::2] + np.hstack([out[:, 2::2], out[:, -1:]]))
    return out


def default_octave_count(width: int, height: int) -> int:
    return max(1, int(math.floor(math.log2(min(width, height)))) - 3)


def level_sigma(octave: int, layer: float, params: SiftParams | None = None) -> float:
    """Absolute blur of one pyramid level in base-image pixels:
    sigma0 * 2**(octave + layer/scales_per_octave)."""
    params = params or SiftParams()
    return params.sigma0 * (2.0 ** (octave + layer / params.scales_per_octave))


def build_scale_space(img: Image, params: SiftParams | None = None) -> ScaleSpace:
    """Gaussian + DoG pyramids with scales_per_octave+3 levels per octave."""
    params = params or SiftParams()
    if img.channels != 1:
        raise ImageError("scale space requires a 1-channel image")
    if img.width < MIN_IMAGE_SIDE or img.height < MIN_IMAGE_SIDE:
        raise ImageError(
            f"image {img.width}x{img.height} too small for scale space "
            f"(minimum {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE})"
        )
    s = params.scales_per_octave
    sigma0 = params.sigma0
    base = img.pixels.astype(np.float64) / 255.0
    init_blur = _ASSUMED_BLUR
    if params.upsample_first:
        base = _upsample2(base)
        init_blur = 2.0 * _ASSUMED_BLUR
    base = _blur(base, math.sqrt(max(sigma0 * sigma0 - init_blur * init_blur, 0.01)))

    n_oct = params.octaves if params.octaves is not None else default_octave_count(img.width, img.height)
    k = 2.0 ** (1.0 / s)
    increments = [sigma0 * (k ** (i - 1)) * math.sqrt(k * k - 1.0) for i in range(1, s + 3)]

    gaussians: list[list[np.ndarray]] = []
    dogs: list[list[np.ndarray]] = []
    for _ in range(n_oct):
        levels = [base]
        for inc in increments:
            levels.append(_blur(levels[-1], inc))
        gaussians.append(levels)
        dogs.append([levels[i + 1] - levels[i] for i in range(s + 2)])
        base = levels[s][::2, ::2]
        if min(base.shape) < 8:
            break
    return ScaleSpace(gaussians, dogs, params, img.width, img.height)


def _find_candidates(dog: list[np.ndarray], s: int, pre_thr: float):
    """(layer, y, x) triples that are >=/<= all 26 neighbors and pass the prefilter."""
    h, w = dog[0].shape
    b = _BORDER
    if h < 2 * b + 3 or w < 2 * b + 3:
        return np.empty((0, 3), dtype=np.intp)
    arr = np.stack(dog)
    found = []
    for layer in range(1, s + 1):
        c = arr[layer, b : h - b, b : w - b]
        nmax = np.full_like(c, -np.inf)
        nmin = np.full_like(c, np.inf)
        for dz in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dz == 0 and dy == 0 and dx == 0:
                        continue
                    sl = arr[layer + dz, b + dy : h - b + dy, b + dx : w - b + dx]
                    np.maximum(nmax, sl, out=nmax)
                    np.minimum(nmin, sl, out=nmin)
        cand = ((c >= nmax) & (c >= pre_thr)) | ((c <= nmin) & (c <= -pre_thr))
        ys, xs = np.nonzero(cand)
        if len(ys):
            found.append(
                np.column_stack([np.full(len(ys), layer), ys + b, xs + b]).astype(np.intp)
            )
    if not found:
        return np.empty((0, 3), dtype=np.intp)
    return np.concatenate(found)


def _derivatives(arr, l, y, x):
    """Batched gradient and Hessian of the DoG stack at integer positions."""
    d = arr[l, y, x]
    gx = 0.5 * (arr[l, y, x + 1] - arr[l, y, x - 1])
    gy = 0.5 * (arr[l, y + 1, x] - arr[l, y - 1, x])
    gs = 0.5 * (arr[l + 1, y, x] - arr[l - 1, y, x])
    dxx = arr[l, y, x + 1] - 2.0 * d + arr[l, y, x - 1]
    dyy = arr[l, y + 1, x] - 2.0 * d + arr[l, y - 1, x]
    dss = arr[l + 1, y, x] - 2.0 * d + arr[l - 1, y, x]
    dxy = 0.25 * (arr[l, y + 1, x + 1] - arr[l, y + 1, x - 1] - arr[l, y - 1, x + 1] + arr[l, y - 1, x - 1])
    dxs = 0.25 * (arr[l + 1, y, x + 1] - arr[l + 1, y, x - 1] - arr[l - 1, y, x + 1] + arr[l - 1, y, x - 1])
    dys = 0.25 * (arr[l + 1, y + 1, x] - arr[l + 1, y - 1, x] - arr[l - 1, y + 1, x] + arr[l - 1, y - 1, x])
    g = np.stack([gx, gy, gs], axis=1)
    hess = np.empty((len(d), 3, 3))
    hess[:, 0, 0] = dxx
    hess[:, 1, 1] = dyy
    hess[:, 2, 2] = dss
    hess[:, 0, 1] = hess[:, 1, 0] = dxy
    hess[:, 0, 2] = hess[:, 2, 0] = dxs
    hess[:, 1, 2] = hess[:, 2, 1] = dys
    return d, g, hess


def detect_keypoints(space: ScaleSpace, params: SiftParams | None = None) -> list[Keypoint]:
    """Refined DoG extrema passing the contrast and edge-ratio tests."""
    params = params or space.params
    s = params.scales_per_octave
    thr = params.contrast_threshold
    r_edge = params.edge_ratio_threshold
    edge_bound = (r_edge + 1.0) ** 2 / r_edge
    upscale = 0.5 if params.upsample_first else 1.0

    keypoints: dict[tuple, Keypoint] = {}
    for octave, dog in enumerate(space.dogs):
        cands = _find_candidates(dog, s, 0.5 * thr)
        if not len(cands):
            continue
        arr = np.stack(dog)
        _, h, w = arr.shape
        l, y, x = cands[:, 0].copy(), cands[:, 1].copy(), cands[:, 2].copy()
        alive = np.ones(len(l), dtype=bool)
        settled = np.zeros(len(l), dtype=bool)
        delta = np.zeros((len(l), 3))
        dhat = np.zeros(len(l))
        hess_final = np.zeros((len(l), 3, 3))

        for _ in range(5):
            act = alive & ~settled
            if not act.any():
                break
            idx = np.nonzero(act)[0]
            d, g, hess = _derivatives(arr, l[idx], y[idx], x[idx])
            det = np.linalg.det(hess)
            ok = np.abs(det) > 1e-30
            alive[idx[~ok]] = False
            if not ok.any():
                continue
            idx = idx[ok]
            step = -np.linalg.solve(hess[ok], g[ok][..., None])[..., 0]
            conv = np.all(np.abs(step) < 0.5, axis=1)

            done_idx = idx[conv]
            settled[done_idx] = True
            delta[done_idx] = step[conv]
            dhat[done_idx] = d[ok][conv] + 0.5 * np.einsum("ij,ij->i", g[ok][conv], step[conv])
            hess_final[done_idx] = hess[ok][conv]

            move_idx = idx[~conv]
            if len(move_idx):
                mstep = np.rint(step[~conv]).astype(np.intp)
                x[move_idx] += mstep[:, 0]
                y[move_idx] += mstep[:, 1]
                l[move_idx] += mstep[:, 2]
                oob = (
                    (l[move_idx] < 1) | (l[move_idx] > s)
                    | (y[move_idx] < _BORDER) | (y[move_idx] >= h - _BORDER)
                    | (x[move_idx] < _BORDER) | (x[move_idx] >= w - _BORDER)
                )
                alive[move_idx[oob]] = False
        alive &= settled  # convergence failures are discarded

        sel = np.nonzero(alive)[0]
        for i in sel:
            if abs(dhat[i]) < thr:
                continue
            dxx, dyy, dxy = hess_final[i, 0, 0], hess_final[i, 1, 1], hess_final[i, 0, 1]
            tr = dxx + dyy
            det2 = dxx * dyy - dxy * dxy
            if det2 <= 0 or tr * tr / det2 >= edge_bound:
                continue
            factor = (2.0**octave) * upscale
            kx = (x[i] + delta[i, 0]) * factor
            ky = (y[i] + delta[i, 1]) * factor
            if not (0 <= kx < space.width and 0 <= ky < space.height):
                continue
            layer = l[i] + delta[i, 2]
            scale = level_sigma(octave, layer, params) * upscale
            key = (octave, round(kx, 1), round(ky, 1), round(layer, 1))
            kp = Keypoint(
                x=float(kx), y=float(ky), scale=float(scale),
                response=float(abs(dhat[i])), octave=octave, layer=float(layer),
            )
            prev = keypoints.get(key)
            if prev is None or kp.response > prev.response:
                keypoints[key] = kp

    return sorted(keypoints.values(), key=lambda k: (k.y, k.x, k.scale, -k.response))


def _smooth_circular(hist: np.ndarray, passes: int = 2) -> np.ndarray:
    kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    for _ in range(passes):
        ext = np.concatenate([hist[-2:], hist, hist[:2]])
        hist = np.convolve(ext, kernel, mode="valid")
    return hist


def _orientation_peaks(g: np.ndarray, x: float, y: float, sigma_oct: float) -> list[float]:
    h, w = g.shape
    sigma = _ORI_SIGMA_FACTOR * sigma_oct
    radius = max(1, int(round(_ORI_RADIUS_FACTOR * sigma)))
    cx, cy = int(round(x)), int(round(y))
    y0, y1 = max(1, cy - radius), min(h - 2, cy + radius)
    x0, x1 = max(1, cx - radius), min(w - 2, cx + radius)
    if y0 > y1 or x0 > x1:
        return []
    ys = np.arange(y0, y1 + 1)
    xs = np.arange(x0, x1 + 1)
    gx = 0.5 * (g[y0 : y1 + 1, x0 + 1 : x1 + 2] - g[y0 : y1 + 1, x0 - 1 : x1])
    gy = 0.5 * (g[y0 + 1 : y1 + 2, x0 : x1 + 1] - g[y0 - 1 : y1, x0 : x1 + 1])
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx)
    dy2 = ((ys - cy) ** 2)[:, None]
    dx2 = ((xs - cx) ** 2)[None, :]
    wgt = np.exp(-(dy2 + dx2) / (2.0 * sigma * sigma))
    bins = np.rint(ang * (_ORI_BINS / (2.0 * math.pi))).astype(np.intp) % _ORI_BINS
    hist = np.zeros(_ORI_BINS)
    np.add.at(hist, bins.ravel(), (mag * wgt).ravel())

    hist = _smooth_circular(hist)
    peak = hist.max()
    if peak <= 0.0:
        return []
    out = []
    for i in range(_ORI_BINS):
        left = hist[(i - 1) % _ORI_BINS]
        right = hist[(i + 1) % _ORI_BINS]
        if hist[i] > left and hist[i] > right and hist[i] >= _ORI_PEAK_RATIO * peak:
            denom = left - 2.0 * hist[i] + right
            pos = i + (0.5 * (left - right) / denom if denom != 0 else 0.0)
            theta = (pos % _ORI_BINS) * (2.0 * math.pi / _ORI_BINS)
            out.append(theta % (2.0 * math.pi))
    return sorted(out)


def _descriptor(g: np.ndarray, x: float, y: float, sigma_oct: float, theta: float):
    h, w = g.shape
    d, n = _DESC_GRID, _DESC_ORI_BINS
    hist_width = _DESC_SCALE_FACTOR * sigma_oct
    radius = int(round(hist_width * math.sqrt(2.0) * (d + 1) * 0.5))
    cx, cy = int(round(x)), int(round(y))
    if cx - radius < 1 or cx + radius > w - 2 or cy - radius < 1 or cy + radius > h - 2:
        return None  # sampling window exits the image: keypoint is dropped

    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    dxg = offs[None, :] + (cx - x)
    dyg = offs[:, None] + (cy - y)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    x_rot = (dxg * cos_t + dyg * sin_t) / hist_width
    y_rot = (-dxg * sin_t + dyg * cos_t) / hist_width
    rbin = y_rot + 0.5 * d - 0.5
    cbin = x_rot + 0.5 * d - 0.5

    ys = slice(cy - radius, cy + radius + 1)
    xs = slice(cx - radius, cx + radius + 1)
    gx = 0.5 * (g[ys, cx - radius + 1 : cx + radius + 2] - g[ys, cx - radius - 1 : cx + radius])
    gy = 0.5 * (g[cy - radius + 1 : cy + radius + 2, xs] - g[cy - radius - 1 : cy + radius, xs])
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx)
    obin = ((ang - theta) % (2.0 * math.pi)) * (n / (2.0 * math.pi))
    wgt = np.exp(-(x_rot**2 + y_rot**2) * (2.0 / (d * d)))

    valid = (rbin > -1.0) & (rbin < d) & (cbin > -1.0) & (cbin < d)
    rb, cb, ob = rbin[valid], cbin[valid], obin[valid]
    mw = (mag * wgt)[valid]

    r0 = np.floor(rb).astype(np.intp)
    c0 = np.floor(cb).astype(np.intp)
    o0 = np.floor(ob).astype(np.intp)
    fr, fc, fo = rb - r0, cb - c0, ob - o0
    o0 %= n

    hist = np.zeros((d + 2, d + 2, n))
    for dr in (0, 1):
        wr = mw * (fr if dr else 1.0 - fr)
        for dc in (0, 1):
            wc = wr * (fc if dc else 1.0 - fc)
            for do in (0, 1):
                wo = wc * (fo if do else 1.0 - fo)
                np.add.at(hist, (r0 + 1 + dr, c0 + 1 + dc, (o0 + do) % n), wo)

    vec = hist[1 : d + 1, 1 : d + 1, :].ravel()
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return None
    vec = np.minimum(vec / norm, _DESC_CLIP)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return None
    return vec / norm


def compute_descriptors(
    img: Image,
    keypoints: list[Keypoint],
    params: SiftParams | None = None,
    space: ScaleSpace | None = None,
) -> list[tuple[Keypoint, np.ndarray]]:
    """Dominant-orientation assignment plus 128-dim descriptors.

    Histogram peaks within 80% of the maximum spawn one oriented keypoint
    each. Keypoints whose sampling window leaves the image are dropped.
    """
    if space is None:
        space = build_scale_space(img, params)
    params = params or space.params
    s = params.scales_per_octave
    upscale = 0.5 if params.upsample_first else 1.0

    out: list[tuple[Keypoint, np.ndarray]] = []
    for kp in keypoints:
        octave = kp.octave
        if octave < 0 or octave >= len(space.gaussians):
            continue
        factor = (2.0**octave) * upscale
        x_oct, y_oct = kp.x / factor, kp.y / factor
        level = min(max(int(round(kp.layer)), 0), s + 2)
        g = space.gaussians[octave][level]
        sigma_oct = params.sigma0 * (2.0 ** (kp.layer / s))
        for theta in _orientation_peaks(g, x_oct, y_oct, sigma_oct):
            vec = _descriptor(g, x_oct, y_oct, sigma_oct, theta)
            if vec is not None:
                out.append((replace(kp, orientation=theta), vec))
    return out


def match_descriptors(a, b, ratio: float = 0.75) -> list[tuple[int, int]]:
    """Exhaustive nearest-neighbor matching with Lowe's ratio test.

    Accepts sequences of 128-vectors. Pair (i, j) is kept when the nearest
    distance divided by the second-nearest is below ratio; a single
    candidate (len(b) == 1) is accepted outright.
    """
    if len(a) == 0 or len(b) == 0:
        return []
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    d2 = np.maximum(
        (av * av).sum(1)[:, None] + (bv * bv).sum(1)[None, :] - 2.0 * (av @ bv.T), 0.0
    )
    matches = []
    for i in range(len(av)):
        row = d2[i]
        j = int(np.argmin(row))
        if len(bv) == 1:
            matches.append((i, j))
            continue
        d1 = math.sqrt(row[j])
        second = np.partition(row, 1)[1]
        d2nd = math.sqrt(second)
        if d2nd > 0 and d1 / d2nd < ratio:
            matches.append((i, int(j)))
    return matches


def detect_and_describe(img: Image, params: SiftParams | None = None):
    """Convenience wrapper: build the pyramid once, detect, then describe."""
    params = params or SiftParams()
    space = build_scale_space(img, params)
    kps = detect_keypoints(space, params)
    return compute_descriptors(img, kps, params, space)


def keypoint_dicts(keypoints: list[Keypoint]) -> list[dict]:
    """JSON-friendly keypoint records for the diagnostic dump."""
    return [
        {
            "x": kp.x,
            "y": kp.y,
            "scale": kp.scale,
            "orientation": kp.orientation,
            "response": kp.response,
        }
        for kp in keypoints
    ]
