# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the loops in ``_kernels_py``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def aa_epsilon(g):
    cdef double[::1] v = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t m = v.shape[0]
    cdef Py_ssize_t i, j, k, span
    cdef double d, best = 0.0
    cdef Py_ssize_t bi = 0, bj = 0, bk = 0
    for j in range(m):
        span = m - j
        if span <= j:
            break
        for i in range(span):
            for k in range(j, span - i):
                d = fabs(v[i + j + k] - v[i + j] - v[i + k] + v[i])
                if d > best:
                    best = d
                    bi = i
                    bj = j
                    bk = k
    return best, bi, bj, bk


def window_oscillation(v, Py_ssize_t k):
    cdef double[::1] a = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double[::1] cs = np.concatenate([[0.0], np.cumsum(a)])
    cdef Py_ssize_t c, lo, hi, q
    cdef double mu, acc
    for c in range(n):
        lo = c - k if c >= k else 0
        hi = c + k + 1 if c + k + 1 <= n else n
        mu = (cs[hi] - cs[lo]) / (hi - lo)
        acc = 0.0
        for q in range(lo, hi):
            acc += fabs(a[q] - mu)
        o[c] = acc / (hi - lo)
    return out


def face_jumps_2d(chi, periodic_last=True):
    arr = np.ascontiguousarray(chi, dtype=np.int64)
    cdef long long[:, ::1] c = arr
    cdef Py_ssize_t n0 = c.shape[0], n1 = c.shape[1], i, j
    along = np.zeros(n0, dtype=np.int64)
    between = np.zeros(max(n0 - 1, 0), dtype=np.int64)
    cdef long long[::1] a = along
    cdef long long[::1] b = between
    cdef long long acc, d
    cdef bint wrap = periodic_last
    with nogil:
        for i in range(n0):
            acc = 0
            for j in range(n1 - 1):
                d = c[i, j + 1] - c[i, j]
                acc += d if d > 0 else -d
            if wrap and n1 > 1:
                d = c[i, 0] - c[i, n1 - 1]
                acc += d if d > 0 else -d
            a[i] = acc
        for i in range(n0 - 1):
            acc = 0
            for j in range(n1):
                d = c[i + 1, j] - c[i, j]
                acc += d if d > 0 else -d
            b[i] = acc
    return along, between
