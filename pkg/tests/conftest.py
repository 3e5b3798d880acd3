"""Shared synthetic-image and data generators."""

import math

import numpy as np
import pytest

from pervisor.imagecore import GrayImage


def gaussian_blob(n: int, cx: float, cy: float, sigma: float, invert: bool = False) -> GrayImage:
    """Bright (or dark) Gaussian blob on a black (or white) background."""
    y, x = np.mgrid[0:n, 0:n]
    g = 255.0 * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * sigma * sigma))
    if invert:
        g = 255.0 - g
    return GrayImage(np.clip(np.round(g), 0, 255).astype(np.uint8))


def texture(seed: int, n: int = 128, nblobs: int = 140, smin: float = 1.5,
            smax: float = 5.0, mask_radius: float | None = None) -> GrayImage:
    """Random multi-scale blob texture; optionally faded outside a center disc."""
    rng = np.random.default_rng(seed)
    img = np.zeros((n, n))
    y, x = np.mgrid[0:n, 0:n]
    for _ in range(nblobs):
        cx, cy = rng.uniform(0, n, 2)
        s = rng.uniform(smin, smax)
        a = rng.uniform(-255, 255)
        img += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    if mask_radius is not None:
        c = (n - 1) / 2
        r = np.sqrt((x - c) ** 2 + (y - c) ** 2)
        img *= np.exp(-np.maximum(0.0, r - mask_radius) ** 2 / (2 * 6.0**2))
    img -= img.min()
    img = img / img.max() * 255.0
    return GrayImage(np.round(img).astype(np.uint8))


def oriented_patch(seed: int, n: int = 128) -> GrayImage:
    """Texture plus a strong randomly-oriented edge through the center, so
    the patch has a well-defined dominant orientation."""
    rng = np.random.default_rng(seed)
    img = np.zeros((n, n))
    y, x = np.mgrid[0:n, 0:n]
    for _ in range(40):
        cx, cy = rng.uniform(n * 0.3, n * 0.7, 2)
        s = rng.uniform(2, 6)
        a = rng.uniform(-150, 150)
        img += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    th = rng.uniform(0, 2 * math.pi)
    d = (x - (n - 1) / 2) * math.cos(th) + (y - (n - 1) / 2) * math.sin(th)
    img += 200.0 * np.tanh(d / 6.0)
    img -= img.min()
    img = img / img.max() * 255.0
    return GrayImage(np.round(img).astype(np.uint8))


def rotate_image(img: GrayImage, degrees: float) -> GrayImage:
    from scipy import ndimage

    rot = ndimage.rotate(
        img.pixels.astype(np.float64), degrees, reshape=False, order=1, mode="nearest"
    )
    return GrayImage(np.clip(np.round(rot), 0, 255).astype(np.uint8))


def rotated_coords(x: float, y: float, degrees: float, n: int) -> tuple[float, float]:
    """Where a point of the original image lands in rotate_image's output."""
    c = (n - 1) / 2.0
    th = math.radians(degrees)
    ca, sa = math.cos(th), math.sin(th)
    return (ca * (x - c) + sa * (y - c) + c, -sa * (x - c) + ca * (y - c) + c)


def clustered_descriptors(seed: int, n_points: int, n_queries: int,
                          n_centers: int = 800):
    """Descriptor-like unit vectors in clusters, queries near indexed points.

    Returns (points, signs, queries, query_signs).
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_centers, 64))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    assign = rng.integers(0, n_centers, n_points)
    pts = centers[assign] + rng.normal(scale=0.08, size=(n_points, 64))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    signs = rng.choice(np.array([-1, 1], dtype=np.int8), n_points)
    qi = rng.integers(0, n_points, n_queries)
    qs = pts[qi] + rng.normal(scale=0.04, size=(n_queries, 64))
    qs /= np.linalg.norm(qs, axis=1, keepdims=True)
    return pts, signs, qs, signs[qi]


@pytest.fixture(scope="session")
def desk_corpus():
    """Ten distinct textured 128x128 images used across recognition tests."""
    return [texture(100 + i) for i in range(10)]
