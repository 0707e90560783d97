# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_fallback.py`` for the reference semantics."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fmin, lgamma, log

cnp.import_array()


cdef enum:
    BLOCK = 256


cdef void _log_q_block(int n, const double* x, double* out, Py_ssize_t count,
                       double* s, double* a, double* b) noexcept nogil:
    # Poisson-sum Horner for a block of x, one step across all elements at a
    # time so the inner loop vectorizes.  x < n runs m = n-1..1 with factor
    # x/m; x >= n runs m = 1..n-1 with factor m/x (the top-down form).
    cdef int t, nn = n - 1
    cdef Py_ssize_t i
    cdef double u, lg = lgamma(<double>n)
    for i in range(count):
        s[i] = 1.0
        if x[i] < n:
            a[i] = x[i]
            b[i] = 0.0
        else:
            a[i] = 0.0
            b[i] = 1.0 / x[i]
    for t in range(1, nn + 1):
        u = 1.0 / (nn + 1 - t)
        for i in range(count):
            s[i] = 1.0 + s[i] * (a[i] * u + b[i] * t)
    for i in range(count):
        if x[i] < n:
            out[i] = fmin(-x[i] + log(s[i]), 0.0)
        else:
            out[i] = fmin(-x[i] + nn * log(x[i]) - lg + log(s[i]), 0.0)


def log_gamma_q_int(int n, const double[::1] x):
    cdef Py_ssize_t start, size = x.shape[0]
    out = np.empty(size, dtype=np.float64)
    cdef double[::1] o = out
    cdef double s[BLOCK]
    cdef double a[BLOCK]
    cdef double b[BLOCK]
    with nogil:
        for start in range(0, size, BLOCK):
            _log_q_block(n, &x[start], &o[start], min(BLOCK, size - start), s, a, b)
    return out


def ladder_rho(const double[:, ::1] xt, const long[::1] ladder):
    cdef Py_ssize_t r, j, rows = xt.shape[0], k = xt.shape[1]
    cdef Py_ssize_t nl = ladder.shape[0], li, start, cnt, col
    out = np.empty(rows, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[:, ::1] cs = np.empty((BLOCK, k), dtype=np.float64)
    cdef double xs[BLOCK]
    cdef double lq[BLOCK]
    cdef double s[BLOCK]
    cdef double a[BLOCK]
    cdef double b[BLOCK]
    cdef double acc
    with nogil:
        for start in range(0, rows, BLOCK):
            cnt = min(BLOCK, rows - start)
            for r in range(cnt):
                acc = 0.0
                for j in range(k):
                    acc = acc + xt[start + r, j]
                    cs[r, j] = acc
            for li in range(nl):
                col = ladder[li] - 1
                for r in range(cnt):
                    xs[r] = cs[r, col]
                _log_q_block(<int>ladder[li], xs, lq, cnt, s, a, b)
                for r in range(cnt):
                    # strict > keeps the smallest ladder index on ties
                    if li == 0 or -lq[r] > o[start + r]:
                        o[start + r] = -lq[r]
    return out


def sweep_gaps(const double[::1] abscissa, const double[::1] delta, closes):
    cdef const unsigned char[::1] cl = np.ascontiguousarray(closes, dtype=np.uint8)
    cdef Py_ssize_t m, n_ev = abscissa.shape[0], g = 0, p = 0
    cdef double slope = 0.0, comp = 0.0, t, y, s
    for m in range(n_ev):
        p += cl[m]
    out = np.zeros(p, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for m in range(n_ev - 1):
            # Neumaier-compensated running slope
            y = delta[m]
            t = slope + y
            if abs(slope) >= abs(y):
                comp += (slope - t) + y
            else:
                comp += (y - t) + slope
            slope = t
            g += cl[m]
            if g >= p:
                break
            s = slope + comp
            if s > 0.0:
                o[g] += s * (abscissa[m + 1] - abscissa[m])
    return out
