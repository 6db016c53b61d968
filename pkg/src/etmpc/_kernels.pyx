# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: batched arm dynamics and piecewise-polynomial eval."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos

IMPL = "cython"

cdef double D0 = 31.0 / 36.0


def arm_rates(object x_in, object u_in):
    """Batched two-link-arm state derivatives; mirrors the numpy fallback."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 4), dtype=np.float64)
    cdef double wa, wb, th, u1, u2, s, c, den
    for i in range(n):
        wa = x[i, 0]; wb = x[i, 1]; th = x[i, 2]
        u1 = u[i, 0]; u2 = u[i, 1]
        s = sin(th); c = cos(th)
        den = D0 + 2.25 * s * s
        out[i, 0] = (2.25 * s * c * wa * wa + 2.0 * wb * wb
                     + (4.0 / 3.0) * u1 - (4.0 / 3.0) * u2 - 1.5 * c * u2) / den
        out[i, 1] = (2.25 * s * c * wb * wb + 3.5 * wa * wa
                     - (7.0 / 3.0) * u2 + 1.5 * c * (u1 - u2)) / den
        out[i, 2] = wa - wb
        out[i, 3] = wb
    return out


def poly_eval(object coeffs_in, object breaks_in, object ts_in, int derivative=0):
    """Piecewise polynomial evaluation; mirrors the numpy fallback."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] coeffs = np.ascontiguousarray(coeffs_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] breaks = np.ascontiguousarray(breaks_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ts = np.ascontiguousarray(
        np.atleast_1d(np.asarray(ts_in, dtype=np.float64)))
    cdef Py_ssize_t nseg = coeffs.shape[0], nstate = coeffs.shape[1], ncoef = coeffs.shape[2]
    cdef Py_ssize_t npts = ts.shape[0], nb = breaks.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((npts, nstate), dtype=np.float64)
    cdef Py_ssize_t i, j, k, lo, hi, mid, d
    cdef double t, s, acc, fac
    for i in range(npts):
        t = ts[i]
        # binary search: right-continuous segment lookup, clipped to range
        lo = 0; hi = nb
        while lo < hi:
            mid = (lo + hi) // 2
            if breaks[mid] <= t:
                lo = mid + 1
            else:
                hi = mid
        k = lo - 1
        if k < 0: k = 0
        if k > nseg - 1: k = nseg - 1
        s = t - breaks[k]
        for j in range(nstate):
            acc = 0.0
            for d in range(ncoef - 1, derivative - 1, -1):
                fac = 1.0
                if derivative >= 1 and d >= 1:
                    fac = d
                if derivative >= 2:
                    fac = d * (d - 1)
                acc = acc * s + coeffs[k, j, d] * fac
            out[i, j] = acc
    return out
