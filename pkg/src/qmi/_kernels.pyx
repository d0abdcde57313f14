# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. ``_kernels_py`` holds the reference twins."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def antitone_project(double[::1] y, double[::1] w, long[::1] lo, long[::1] hi,
                     double tol=1e-13, long max_sweeps=200000):
    """Weighted least squares onto {x : x[lo[k]] >= x[hi[k]] for all k}.

    Hildreth's dual coordinate ascent. Returns ``(x, lam, sweeps)``; ``sweeps``
    is negative when ``max_sweeps`` was hit before the change fell under tol.
    """
    cdef Py_ssize_t n = y.shape[0], m = lo.shape[0]
    cdef Py_ssize_t k, a, b
    cdef long sweep = 0
    cdef double g, lam_new, delta, change, biggest, scale = 0.0
    x_arr = np.array(y, dtype=np.float64, copy=True)
    lam_arr = np.zeros(m, dtype=np.float64)
    inv_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] lam = lam_arr
    cdef double[::1] inv = inv_arr
    for k in range(n):
        inv[k] = 1.0 / w[k]
        if fabs(y[k]) > scale:
            scale = fabs(y[k])
    cdef double thresh = tol * (1.0 + scale)
    with nogil:
        while sweep < max_sweeps:
            sweep += 1
            biggest = 0.0
            for k in range(m):
                a = lo[k]
                b = hi[k]
                g = x[b] - x[a]
                lam_new = lam[k] + g / (inv[a] + inv[b])
                if lam_new < 0.0:
                    lam_new = 0.0
                delta = lam_new - lam[k]
                if delta != 0.0:
                    lam[k] = lam_new
                    x[b] -= delta * inv[b]
                    x[a] += delta * inv[a]
                    change = fabs(delta) * (inv[a] + inv[b])
                    if change > biggest:
                        biggest = change
            if biggest <= thresh:
                break
        if biggest > thresh:
            sweep = -sweep
    return x_arr, lam_arr, sweep


def quantile_positions(long long[:, ::1] cum, long long[::1] totals, long long[::1] percents):
    """First column j with ``100 * cum[i, j] >= p * totals[i]`` for each row i and percent p.

    Rows with a zero total get -1.
    """
    cdef Py_ssize_t m = cum.shape[0], n = cum.shape[1], q = percents.shape[0]
    cdef Py_ssize_t i, j, t, lo_j, hi_j, mid
    cdef long long need
    out_arr = np.full((m, q), -1, dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    with nogil:
        for i in range(m):
            if totals[i] <= 0:
                continue
            for t in range(q):
                need = percents[t] * totals[i]
                lo_j = 0
                hi_j = n - 1
                while lo_j < hi_j:
                    mid = (lo_j + hi_j) >> 1
                    if 100 * cum[i, mid] >= need:
                        hi_j = mid
                    else:
                        lo_j = mid + 1
                out[i, t] = lo_j
    return out_arr
