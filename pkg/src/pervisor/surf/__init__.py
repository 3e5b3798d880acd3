"""Hessian-based interest point detection and 64-d descriptors.

Box-filter approximations of second-order Gaussian derivatives are
evaluated over integral images across four octaves of filter sizes.
Descriptors are orientation-aligned Haar-wavelet statistics over a 4x4
subregion grid, L2-normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..imagecore import GrayImage, IntegralImage, box_sum, integral
from ._backend import BACKEND, response_map

# Four octaves of filter sizes with the sampling stride doubling per octave.
OCTAVES: tuple[tuple[int, tuple[int, ...]], ...] = (
    (1, (9, 15, 21, 27)),
    (2, (15, 27, 39, 51)),
    (4, (27, 51, 75, 99)),
    (8, (51, 99, 147, 195)),
)

DEFAULT_THRESHOLD = 10.0

_ORI_SIGMA_W = 2.5  # Gaussian weight sigma (in units of scale) for orientation
_DESC_SIGMA_W = 3.3  # and for the descriptor window
_ORI_WINDOW = math.pi / 3.0
_ORI_STEP = math.pi / 32.0


class RegionOutOfBounds(Exception):
    """A point's sampling neighborhood exits the image; feature is discarded."""


class FlatDescriptorError(Exception):
    """All Haar responses are zero; the descriptor cannot be normalized."""


@dataclass(frozen=True)
class InterestPoint:
    x: float
    y: float
    scale: float
    orientation: float  # radians in [0, 2pi)
    laplacian_sign: int  # -1 or +1
    response: float
    size: int  # discrete filter size the point was detected at


@dataclass(frozen=True)
class Descriptor:
    values: np.ndarray  # float64, shape (64,), unit L2 norm

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (64,):
            raise ValueError(f"descriptor must have 64 components, got {v.shape}")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ExtractResult:
    features: list[tuple[InterestPoint, Descriptor]]
    skipped: int  # points dropped because their neighborhood left the image


def hessian_response(
    ii: IntegralImage, x: int, y: int, filter_size: int
) -> tuple[float, int]:
    """Det-of-Hessian box response and Laplacian sign at a single pixel.

    Scalar reference path; the detector uses the vectorized/compiled kernel
    with identical arithmetic.
    """
    size = filter_size
    if size < 9 or size % 6 != 3:
        raise ValueError(f"filter size must be 9, 15, 21, ... got {size}")
    half = (size - 1) // 2
    lobe = size // 3
    m = (lobe - 1) // 2
    if not (half <= x < ii.width - half and half <= y < ii.height - half):
        raise IndexError(
            f"filter size {size} at ({x},{y}) exceeds {ii.width}x{ii.height} image"
        )
    dxx = box_sum(ii, x - half, y - lobe + 1, x + half, y + lobe - 1) - 3 * box_sum(
        ii, x - m, y - lobe + 1, x + m, y + lobe - 1
    )
    dyy = box_sum(ii, x - lobe + 1, y - half, x + lobe - 1, y + half) - 3 * box_sum(
        ii, x - lobe + 1, y - m, x + lobe - 1, y + m
    )
    dxy = (
        box_sum(ii, x + 1, y - lobe, x + lobe, y - 1)
        + box_sum(ii, x - lobe, y + 1, x - 1, y + lobe)
        - box_sum(ii, x - lobe, y - lobe, x - 1, y - 1)
        - box_sum(ii, x + 1, y + 1, x + lobe, y + lobe)
    )
    inv = 1.0 / (size * size)
    fxx = dxx * inv
    fyy = dyy * inv
    fxy = dxy * inv
    t = 0.9 * fxy
    prod = fxx * fyy
    tt = t * t
    sign = 1 if fxx + fyy >= 0.0 else -1
    return prod - tt, sign


def scale_of(filter_size: int) -> float:
    return 1.2 * filter_size / 9.0


def detect(ii: IntegralImage, threshold: float = DEFAULT_THRESHOLD) -> list[InterestPoint]:
    """Scale-space maxima of the det-of-Hessian response.

    3x3x3 non-maximum suppression within each octave (the two interior
    filter sizes can be maxima); results are ordered by descending
    response with a fixed positional tie-break so detection is
    deterministic.
    """
    if ii.width < 15 or ii.height < 15:
        raise ValueError("image too small for detection (need at least 15x15)")
    padded = ii.padded
    found: dict[tuple[int, int, int], InterestPoint] = {}
    for stride, sizes in OCTAVES:
        maps = [response_map(padded, size, stride) for size in sizes]
        gh, gw = maps[0][0].shape
        if gh < 3 or gw < 3:
            continue
        for si in (1, 2):
            resp, lap = maps[si]
            c = resp[1:-1, 1:-1]
            ok = c > threshold
            if not ok.any():
                continue
            for ds in (-1, 0, 1):
                neighbor = maps[si + ds][0]
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        if ds == 0 and dy == 0 and dx == 0:
                            continue
                        ok &= c > neighbor[
                            1 + dy : gh - 1 + dy, 1 + dx : gw - 1 + dx
                        ]
            for gy, gx in np.argwhere(ok):
                x = int(gx + 1) * stride
                y = int(gy + 1) * stride
                key = (x, y, sizes[si])
                if key in found:
                    continue  # same size re-sampled by a later octave
                found[key] = InterestPoint(
                    x=float(x),
                    y=float(y),
                    scale=scale_of(sizes[si]),
                    orientation=0.0,
                    laplacian_sign=int(lap[gy + 1, gx + 1]),
                    response=float(c[gy, gx]),
                    size=sizes[si],
                )
    points = list(found.values())
    points.sort(key=lambda p: (-p.response, p.y, p.x, p.size))
    return points


def _haar_responses(padded: np.ndarray, px: np.ndarray, py: np.ndarray, r: int):
    """Horizontal and vertical Haar responses (side 2r) at integer points.

    The x response is (right half) - (left half) over cols [px-r, px+r-1],
    rows [py-r, py+r-1]; the y response is (bottom half) - (top half).
    """

    def s(xa, ya, xb, yb):
        return (
            padded[yb + 1, xb + 1]
            - padded[ya, xb + 1]
            - padded[yb + 1, xa]
            + padded[ya, xa]
        )

    dx = s(px, py - r, px + r - 1, py + r - 1) - s(px - r, py - r, px - 1, py + r - 1)
    dy = s(px - r, py, px + r - 1, py + r - 1) - s(px - r, py - r, px + r - 1, py - 1)
    return dx.astype(np.float64), dy.astype(np.float64)


def assign_orientation(ii: IntegralImage, pt: InterestPoint) -> InterestPoint:
    """Dominant direction of Haar responses on a radius-6-scale disc.

    A pi/3-wide window slides over the sample angles; the orientation is
    the direction of the largest Gaussian-weighted response sum.
    """
    s = pt.scale
    step = max(1, round(s))
    r = max(1, round(2.0 * s))  # half of the 4*scale wavelet side
    cx = round(pt.x)
    cy = round(pt.y)

    offs = [(i, j) for j in range(-6, 7) for i in range(-6, 7) if i * i + j * j <= 36]
    ij = np.array(offs, dtype=np.int64)
    px = cx + ij[:, 0] * step
    py = cy + ij[:, 1] * step
    if (
        px.min() - r < 0
        or py.min() - r < 0
        or px.max() + r > ii.width
        or py.max() + r > ii.height
    ):
        raise RegionOutOfBounds(
            f"orientation window of point ({pt.x:.1f},{pt.y:.1f}) scale {s:.2f} "
            "exits the image"
        )
    dx, dy = _haar_responses(ii.padded, px, py, r)
    g = np.exp(
        -(ij[:, 0] ** 2 + ij[:, 1] ** 2) / (2.0 * _ORI_SIGMA_W * _ORI_SIGMA_W)
    )
    wx = g * dx
    wy = g * dy
    ang = np.arctan2(wy, wx) % (2.0 * math.pi)

    best_norm = -1.0
    best_theta = 0.0
    a = 0.0
    two_pi = 2.0 * math.pi
    while a < two_pi:
        in_win = ((ang - a) % two_pi) < _ORI_WINDOW
        sx = float(wx[in_win].sum())
        sy = float(wy[in_win].sum())
        norm = sx * sx + sy * sy
        if norm > best_norm:
            best_norm = norm
            best_theta = math.atan2(sy, sx) % two_pi
        a += _ORI_STEP
    return replace(pt, orientation=best_theta)


def describe(ii: IntegralImage, pt: InterestPoint) -> Descriptor:
    """64-d descriptor from an oriented 20-scale square window.

    4x4 subregions, 5x5 samples each (spacing = scale); per subregion the
    sums (dx, |dx|, dy, |dy|) of orientation-aligned Haar responses,
    Gaussian-weighted, concatenated and L2-normalized.
    """
    s = pt.scale
    theta = pt.orientation
    r = max(1, round(s))  # half of the 2*scale wavelet side
    ct = math.cos(theta)
    st = math.sin(theta)

    grid = (np.arange(20) - 9.5) * s  # offsets in pixels, -9.5s .. 9.5s
    u, v = np.meshgrid(grid, grid)  # v varies along rows, u along cols
    px = np.rint(pt.x + u * ct - v * st).astype(np.int64)
    py = np.rint(pt.y + u * st + v * ct).astype(np.int64)
    if (
        px.min() - r < 0
        or py.min() - r < 0
        or px.max() + r > ii.width
        or py.max() + r > ii.height
    ):
        raise RegionOutOfBounds(
            f"descriptor window of point ({pt.x:.1f},{pt.y:.1f}) scale {s:.2f} "
            "exits the image"
        )
    dx, dy = _haar_responses(ii.padded, px, py, r)
    # Rotate responses into the orientation frame.
    rdx = dx * ct + dy * st
    rdy = -dx * st + dy * ct
    g = np.exp(-(u * u + v * v) / (2.0 * (_DESC_SIGMA_W * s) ** 2))
    rdx *= g
    rdy *= g

    # (4, 5, 4, 5) = (subregion row, sample row, subregion col, sample col)
    bdx = rdx.reshape(4, 5, 4, 5)
    bdy = rdy.reshape(4, 5, 4, 5)
    vals = np.stack(
        [
            bdx.sum(axis=(1, 3)),
            np.abs(bdx).sum(axis=(1, 3)),
            bdy.sum(axis=(1, 3)),
            np.abs(bdy).sum(axis=(1, 3)),
        ],
        axis=-1,
    ).reshape(64)
    norm = float(np.sqrt(np.dot(vals, vals)))
    if norm == 0.0:
        raise FlatDescriptorError(
            f"all-zero descriptor at ({pt.x:.1f},{pt.y:.1f})"
        )
    return Descriptor(vals / norm)


def extract(img: GrayImage, threshold: float = DEFAULT_THRESHOLD) -> ExtractResult:
    """detect -> assign_orientation -> describe, dropping boundary points."""
    ii = integral(img)
    features: list[tuple[InterestPoint, Descriptor]] = []
    skipped = 0
    for pt in detect(ii, threshold):
        try:
            oriented = assign_orientation(ii, pt)
            desc = describe(ii, oriented)
        except (RegionOutOfBounds, FlatDescriptorError):
            skipped += 1
            continue
        features.append((oriented, desc))
    return ExtractResult(features=features, skipped=skipped)
