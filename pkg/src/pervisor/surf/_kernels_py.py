"""Pure-numpy Hessian response kernel (fallback backend).

Must stay bit-identical to the Cython kernel in _kernels.pyx: same integer
box sums, same float64 operation order.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def response_map(padded: np.ndarray, size: int, stride: int):
    """Det-of-Hessian box-filter responses on a stride-aligned grid.

    padded: int64 integral table with a zero row/column prepended,
            shape (h+1, w+1).
    Returns (resp, lap): float64 and int8 arrays of shape
    (ceil(h/stride), ceil(w/stride)); grid cell (gy, gx) corresponds to
    pixel (gx*stride, gy*stride). Cells where the filter does not fit hold
    -inf response and 0 sign.
    """
    h = padded.shape[0] - 1
    w = padded.shape[1] - 1
    gh = (h + stride - 1) // stride
    gw = (w + stride - 1) // stride
    resp = np.full((gh, gw), -np.inf, dtype=np.float64)
    lap = np.zeros((gh, gw), dtype=np.int8)

    half = (size - 1) // 2
    lobe = size // 3
    m = (lobe - 1) // 2

    xs = np.arange(0, w, stride)
    ys = np.arange(0, h, stride)
    vx = xs[(xs >= half) & (xs <= w - 1 - half)]
    vy = ys[(ys >= half) & (ys <= h - 1 - half)]
    if len(vx) == 0 or len(vy) == 0:
        return resp, lap
    X, Y = np.meshgrid(vx, vy)

    def box(xa, ya, xb, yb):
        return (
            padded[yb + 1, xb + 1]
            - padded[ya, xb + 1]
            - padded[yb + 1, xa]
            + padded[ya, xa]
        )

    dxx = box(X - half, Y - lobe + 1, X + half, Y + lobe - 1) - 3 * box(
        X - m, Y - lobe + 1, X + m, Y + lobe - 1
    )
    dyy = box(X - lobe + 1, Y - half, X + lobe - 1, Y + half) - 3 * box(
        X - lobe + 1, Y - m, X + lobe - 1, Y + m
    )
    dxy = (
        box(X + 1, Y - lobe, X + lobe, Y - 1)
        + box(X - lobe, Y + 1, X - 1, Y + lobe)
        - box(X - lobe, Y - lobe, X - 1, Y - 1)
        - box(X + 1, Y + 1, X + lobe, Y + lobe)
    )

    inv = 1.0 / (size * size)
    fxx = dxx * inv
    fyy = dyy * inv
    fxy = dxy * inv
    t = 0.9 * fxy
    prod = fxx * fyy
    tt = t * t
    r = prod - tt
    sign = np.where(fxx + fyy >= 0.0, 1, -1).astype(np.int8)

    gy = vy // stride
    gx = vx // stride
    resp[np.ix_(gy, gx)] = r
    lap[np.ix_(gy, gx)] = sign
    return resp, lap
