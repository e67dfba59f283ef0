# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: P1 element assembly arrays and Legendre sums."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def element_arrays(coords):
    """Per-triangle area and P1 stiffness matrix on flat 2-D triangles.

    Same contract as the numpy fallback: coords is (t, 3, 2), returns
    (areas (t,), stiff (t, 3, 3)).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=3] c = np.ascontiguousarray(
        coords, dtype=np.float64)
    cdef Py_ssize_t t = c.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] areas = np.empty(t, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] stiff = np.empty((t, 3, 3),
                                                             dtype=np.float64)
    cdef double x0, x1, x2, y0, y1, y2, det, area, inv4a
    cdef double b0, b1, b2, c0, c1, c2
    cdef Py_ssize_t i
    with nogil:
        for i in range(t):
            x0 = c[i, 0, 0]; y0 = c[i, 0, 1]
            x1 = c[i, 1, 0]; y1 = c[i, 1, 1]
            x2 = c[i, 2, 0]; y2 = c[i, 2, 1]
            det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            area = 0.5 * det if det >= 0 else -0.5 * det
            areas[i] = area
            b0 = y1 - y2; b1 = y2 - y0; b2 = y0 - y1
            c0 = x2 - x1; c1 = x0 - x2; c2 = x1 - x0
            if area > 0:
                inv4a = 1.0 / (4.0 * area)
            else:
                inv4a = INFINITY
            stiff[i, 0, 0] = (b0 * b0 + c0 * c0) * inv4a
            stiff[i, 0, 1] = (b0 * b1 + c0 * c1) * inv4a
            stiff[i, 0, 2] = (b0 * b2 + c0 * c2) * inv4a
            stiff[i, 1, 0] = stiff[i, 0, 1]
            stiff[i, 1, 1] = (b1 * b1 + c1 * c1) * inv4a
            stiff[i, 1, 2] = (b1 * b2 + c1 * c2) * inv4a
            stiff[i, 2, 0] = stiff[i, 0, 2]
            stiff[i, 2, 1] = stiff[i, 1, 2]
            stiff[i, 2, 2] = (b2 * b2 + c2 * c2) * inv4a
    return areas, stiff


def legendre_sum(x, weights):
    """Weighted Legendre sum over l = 1..K via the three-term recurrence.

    Level-major loop: the inner pass over points is a fused
    accumulate-and-advance with precomputed recurrence coefficients, so
    consecutive iterations are independent and vectorize.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(
        x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(
        weights, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t kmax = w.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_prev = np.ones(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_cur = xv.copy()
    cdef double wl, a, b, pc, pn
    cdef Py_ssize_t i, l
    with nogil:
        for l in range(1, kmax + 1):
            wl = w[l - 1]
            if l < kmax:
                a = (2.0 * l + 1.0) / (l + 1.0)
                b = <double>l / (l + 1.0)
                for i in range(n):
                    pc = p_cur[i]
                    out[i] += wl * pc
                    pn = a * xv[i] * pc - b * p_prev[i]
                    p_prev[i] = pc
                    p_cur[i] = pn
            else:
                for i in range(n):
                    out[i] += wl * p_cur[i]
    return out
