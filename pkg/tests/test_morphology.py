"""Grayscale dilation: oracle agreement plus extensivity and monotonicity."""

import numpy as np
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays

from touchprint import Image, StructuringElement, dilate


def naive_dilate(a, mask):
    """Brute-force neighborhood max; out-of-bounds reads as 0."""
    h, w = a.shape
    n = mask.shape[0]
    r = n // 2
    out = np.zeros_like(a)
    for y in range(h):
        for x in range(w):
            best = 0
            for i in range(n):
                for j in range(n):
                    if not mask[i, j]:
                        continue
                    yy, xx = y + i - r, x + j - r
                    if 0 <= yy < h and 0 <= xx < w:
                        best = max(best, int(a[yy, xx]))
            out[y, x] = best
    return out


def random_binary(rng, h=16, w=16, p=0.2):
    return ((rng.random((h, w)) < p) * 255).astype(np.uint8)


def test_single_pixel_becomes_block():
    a = np.zeros((7, 7), dtype=np.uint8)
    a[3, 3] = 255
    out = dilate(Image(a), StructuringElement.square(3)).pixels
    expected = np.zeros((7, 7), dtype=np.uint8)
    expected[2:5, 2:5] = 255
    assert np.array_equal(out, expected)


def test_all_zero_stays_zero():
    img = Image(np.zeros((9, 9), dtype=np.uint8))
    assert np.all(dilate(img).pixels == 0)


def test_cross_se_matches_oracle(rng):
    se = StructuringElement.cross(3)
    for _ in range(20):
        a = random_binary(rng)
        out = dilate(Image(a), se).pixels
        assert np.array_equal(out, naive_dilate(a, np.asarray(se.mask)))


def test_grayscale_matches_oracle(rng):
    se = StructuringElement.square(5)
    for _ in range(10):
        a = rng.integers(0, 256, (12, 12), dtype=np.uint8)
        out = dilate(Image(a), se).pixels
        assert np.array_equal(out, naive_dilate(a, np.asarray(se.mask)))


def test_extensive_on_binary(rng):
    for _ in range(25):
        a = random_binary(rng)
        out = dilate(Image(a)).pixels
        assert np.all(out[a == 255] == 255)  # foreground is preserved


def test_monotone(rng):
    for _ in range(25):
        a = random_binary(rng)
        b = np.maximum(a, random_binary(rng))  # a subset of b
        da = dilate(Image(a)).pixels
        db = dilate(Image(b)).pixels
        assert np.all(da <= db)


@settings(max_examples=25, deadline=None)
@given(arrays(np.uint8, (8, 8)))
def test_dilation_never_decreases_with_full_se(arr):
    out = dilate(Image(arr.copy()), StructuringElement.square(3)).pixels
    assert np.all(out >= arr)


def test_iterations_compose(rng):
    a = random_binary(rng)
    se = StructuringElement.square(3)
    twice = dilate(dilate(Image(a), se), se)
    assert dilate(Image(a), se, iterations=2) == twice
