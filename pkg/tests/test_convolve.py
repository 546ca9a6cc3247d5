"""Convolution engine and Laplacian against a naive direct-summation oracle."""

import numpy as np
import pytest

from touchprint import Image, Kernel, convolve, laplacian
from touchprint.ops import LAPLACIAN_KERNEL

from conftest import gray_image


def naive_correlate(a, k):
    """Quadruple-loop correlation with replicate padding (index clamping)."""
    h, w = a.shape
    n = k.shape[0]
    r = n // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    yy = min(max(y + i - r, 0), h - 1)
                    xx = min(max(x + j - r, 0), w - 1)
                    acc += k[i, j] * a[yy, xx]
            out[y, x] = acc
    return out


def test_identity_kernel(rng):
    img = gray_image(rng, 8, 8)
    k = np.zeros((3, 3))
    k[1, 1] = 1.0
    out = convolve(img, Kernel(k)).data
    assert np.array_equal(out, img.pixels.astype(float))


def test_zero_sum_kernel_on_constant():
    img = Image(np.full((6, 6), 99, dtype=np.uint8))
    out = convolve(img, LAPLACIAN_KERNEL).data
    assert np.all(out == 0.0)


def test_random_kernels_match_oracle(rng):
    for _ in range(20):
        img = gray_image(rng, 8, 8)
        size = int(rng.choice([3, 5]))
        k = rng.normal(0, 1, (size, size))
        out = convolve(img, Kernel(k)).data
        expected = naive_correlate(img.pixels.astype(float), k)
        assert np.max(np.abs(out - expected)) <= 1e-9


def test_laplacian_constant_zero():
    img = Image(np.full((7, 7), 31, dtype=np.uint8))
    assert np.all(laplacian(img).pixels == 0)


def test_laplacian_single_bright_pixel():
    a = np.zeros((5, 5), dtype=np.uint8)
    a[2, 2] = 255
    out = laplacian(Image(a)).pixels
    assert out[2, 2] == 255  # |-1020| clamped
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        assert out[2 + dy, 2 + dx] == 255


def test_laplacian_random_oracle(rng):
    img = gray_image(rng, 10, 10)
    expected = np.abs(naive_correlate(img.pixels.astype(float), np.asarray(LAPLACIAN_KERNEL.coefficients)))
    expected = np.clip(np.floor(expected + 0.5), 0, 255).astype(np.uint8)
    assert np.array_equal(laplacian(img).pixels, expected)


def test_convolve_requires_gray(rng):
    from touchprint import ImageError

    rgb = Image(rng.integers(0, 256, (4, 4, 3), dtype=np.uint8))
    with pytest.raises(ImageError):
        convolve(rgb, LAPLACIAN_KERNEL)
