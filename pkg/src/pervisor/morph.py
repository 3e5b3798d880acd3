"""Morphing sequences: contour interpolation, pixel blending, warping.

The blend convention is alpha = 1 selects the source, so a sequence runs
alpha from 1 down to 0.  With contours, both endpoints are warped toward
the interpolated contour by an inverse-distance-weighted (Shepard, power
2) displacement field before blending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import GrayImage


class ContourFormatError(Exception):
    """Unreadable contour file."""


@dataclass(frozen=True)
class ContourPair:
    source_points: np.ndarray  # float64 (n, 2), n >= 2, (x, y)
    dest_points: np.ndarray  # float64 (n, 2), same order

    def __post_init__(self):
        s = np.ascontiguousarray(self.source_points, dtype=np.float64)
        d = np.ascontiguousarray(self.dest_points, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 2:
            raise ValueError("need at least 2 contour points of shape (n, 2)")
        if s.shape != d.shape:
            raise ValueError("source and destination contours differ in length")
        s.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "source_points", s)
        object.__setattr__(self, "dest_points", d)


@dataclass(frozen=True)
class MorphSequence:
    frames: list[GrayImage]


def interpolate_contour(pair: ContourPair, alpha: float) -> np.ndarray:
    """alpha * source + (1 - alpha) * dest, per point."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must be in [0, 1]")
    return alpha * pair.source_points + (1.0 - alpha) * pair.dest_points


def blend(src: GrayImage, dst: GrayImage, alpha: float) -> GrayImage:
    """Per-pixel alpha * src + (1 - alpha) * dst, rounded half away from zero."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must be in [0, 1]")
    if src.pixels.shape != dst.pixels.shape:
        raise ValueError("blend requires equal image dimensions")
    mix = alpha * src.pixels.astype(np.float64) + (1.0 - alpha) * dst.pixels
    # Values are non-negative, so half-away-from-zero == floor(x + 0.5).
    out = np.clip(np.floor(mix + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(out)


def _warp_toward(img: GrayImage, from_pts: np.ndarray, to_pts: np.ndarray) -> GrayImage:
    """Shepard (power-2) warp moving contour points from_pts to to_pts.

    Inverse mapping: each output pixel samples the input at its position
    plus the IDW-blended displacement (from - to), with bilinear
    resampling and edge clamping.
    """
    if np.array_equal(from_pts, to_pts):
        return img  # identity warp keeps endpoint frames bit-exact
    h, w = img.pixels.shape
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs.astype(np.float64)
    py = ys.astype(np.float64)
    disp = from_pts - to_pts  # (n, 2)
    wsum = np.zeros((h, w))
    dxsum = np.zeros((h, w))
    dysum = np.zeros((h, w))
    exact_dx = np.zeros((h, w))
    exact_dy = np.zeros((h, w))
    exact_hit = np.zeros((h, w), dtype=bool)
    for (tx, ty), (dx, dy) in zip(to_pts, disp):
        d2 = (px - tx) ** 2 + (py - ty) ** 2
        hit = d2 == 0.0
        if hit.any():
            new = hit & ~exact_hit
            exact_dx[new] = dx
            exact_dy[new] = dy
            exact_hit |= hit
            d2 = np.where(hit, np.inf, d2)
        wgt = 1.0 / d2
        wsum += wgt
        dxsum += wgt * dx
        dysum += wgt * dy
    ux = np.where(exact_hit, exact_dx, dxsum / wsum)
    uy = np.where(exact_hit, exact_dy, dysum / wsum)

    sx = np.clip(px + ux, 0.0, w - 1.0)
    sy = np.clip(py + uy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    p = img.pixels.astype(np.float64)
    val = (
        p[y0, x0] * (1 - fx) * (1 - fy)
        + p[y0, x1] * fx * (1 - fy)
        + p[y1, x0] * (1 - fx) * fy
        + p[y1, x1] * fx * fy
    )
    return GrayImage(np.clip(np.floor(val + 0.5), 0, 255).astype(np.uint8))


def morph_sequence(
    src: GrayImage,
    dst: GrayImage,
    pair: ContourPair | None,
    n_frames: int,
) -> MorphSequence:
    """n_frames frames running alpha from 1 (source) down to 0 (destination)."""
    if src.pixels.shape != dst.pixels.shape:
        raise ValueError("morph requires equal image dimensions")
    if n_frames < 2:
        raise ValueError("need at least 2 frames")
    frames: list[GrayImage] = []
    for k in range(n_frames):
        alpha = 1.0 - k / (n_frames - 1)
        if pair is None:
            frames.append(blend(src, dst, alpha))
        else:
            target = interpolate_contour(pair, alpha)
            warped_src = _warp_toward(src, pair.source_points, target)
            warped_dst = _warp_toward(dst, pair.dest_points, target)
            frames.append(blend(warped_src, warped_dst, alpha))
    return MorphSequence(frames)


def load_contours(path) -> ContourPair:
    """Parse the two-block contour file: `x y` lines, blank line between
    the source and destination blocks."""
    blocks: list[list[tuple[float, float]]] = [[]]
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line:
                if blocks[-1]:
                    blocks.append([])
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ContourFormatError(f"line {lineno}: expected 'x y', got {line!r}")
            try:
                blocks[-1].append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ContourFormatError(f"line {lineno}: {exc}") from exc
    blocks = [b for b in blocks if b]
    if len(blocks) != 2:
        raise ContourFormatError(
            f"expected 2 blank-line-separated blocks, got {len(blocks)}"
        )
    return ContourPair(np.array(blocks[0]), np.array(blocks[1]))
