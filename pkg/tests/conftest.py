import numpy as np
import pytest

from touchprint import Image


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def gray_image(rng, h, w):
    return Image(rng.integers(0, 256, (h, w), dtype=np.uint8))


def rgb_image(rng, h, w):
    return Image(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def blob_image(h, w, centers, sigma=4.0, amp=255.0):
    """One or more Gaussian blobs on a dark field."""
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    acc = np.zeros((h, w))
    for cx, cy, s in centers:
        acc += amp * np.exp(-(((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * (s or sigma) ** 2)))
    return Image(np.clip(acc, 0, 255).astype(np.uint8))


def whorl_image(h, w, cx, cy, freq=0.55, amp=110.0, seed=0):
    """Fingerprint-like concentric ridges under a Gaussian envelope."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    r = np.hypot(xs - cx, ys - cy)
    envelope = np.exp(-((r / (0.45 * min(h, w))) ** 2))
    ridges = amp * np.sin(freq * r + rng.uniform(0, 2 * np.pi)) * envelope
    base = 128.0 + ridges + rng.normal(0, 4.0, (h, w))
    return Image(np.clip(base, 0, 255).astype(np.uint8))
