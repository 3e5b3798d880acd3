# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Hessian response kernel (hot loop of the detector).

Bit-identical to _kernels_py.response_map: integer box sums, then float64
operations in the same order (no FMA contraction; see setup.py flags).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline cnp.int64_t _box(const cnp.int64_t[:, ::1] p,
                             Py_ssize_t xa, Py_ssize_t ya,
                             Py_ssize_t xb, Py_ssize_t yb) nogil:
    return p[yb + 1, xb + 1] - p[ya, xb + 1] - p[yb + 1, xa] + p[ya, xa]


def response_map(padded, int size, int stride):
    """Same contract as _kernels_py.response_map."""
    cdef const cnp.int64_t[:, ::1] p = np.ascontiguousarray(padded, dtype=np.int64)
    cdef Py_ssize_t h = p.shape[0] - 1
    cdef Py_ssize_t w = p.shape[1] - 1
    cdef Py_ssize_t gh = (h + stride - 1) // stride
    cdef Py_ssize_t gw = (w + stride - 1) // stride

    resp_arr = np.full((gh, gw), -np.inf, dtype=np.float64)
    lap_arr = np.zeros((gh, gw), dtype=np.int8)
    cdef double[:, ::1] resp = resp_arr
    cdef signed char[:, ::1] lap = lap_arr

    cdef Py_ssize_t half = (size - 1) // 2
    cdef Py_ssize_t lobe = size // 3
    cdef Py_ssize_t m = (lobe - 1) // 2

    cdef Py_ssize_t x, y
    cdef cnp.int64_t dxx, dyy, dxy
    cdef double inv = 1.0 / (size * size)
    cdef double fxx, fyy, fxy, t, prod, tt

    with nogil:
        y = 0
        while y < h:
            if y >= half and y <= h - 1 - half:
                x = 0
                while x < w:
                    if x >= half and x <= w - 1 - half:
                        dxx = (_box(p, x - half, y - lobe + 1, x + half, y + lobe - 1)
                               - 3 * _box(p, x - m, y - lobe + 1, x + m, y + lobe - 1))
                        dyy = (_box(p, x - lobe + 1, y - half, x + lobe - 1, y + half)
                               - 3 * _box(p, x - lobe + 1, y - m, x + lobe - 1, y + m))
                        dxy = (_box(p, x + 1, y - lobe, x + lobe, y - 1)
                               + _box(p, x - lobe, y + 1, x - 1, y + lobe)
                               - _box(p, x - lobe, y - lobe, x - 1, y - 1)
                               - _box(p, x + 1, y + 1, x + lobe, y + lobe))
                        fxx = dxx * inv
                        fyy = dyy * inv
                        fxy = dxy * inv
                        t = 0.9 * fxy
                        prod = fxx * fyy
                        tt = t * t
                        resp[y // stride, x // stride] = prod - tt
                        lap[y // stride, x // stride] = 1 if fxx + fyy >= 0.0 else -1
                    x += stride
            y += stride
    return resp_arr, lap_arr
