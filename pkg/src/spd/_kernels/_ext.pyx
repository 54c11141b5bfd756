# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of spd._kernels.fallback.

Every kernel performs the same floating-point operations in the same
order as its numpy counterpart (see fallback.py for the documented
sequences); the build disables fp-contraction so the compiler cannot
fuse multiply-adds and change the rounding.  tests/test_kernels.py
asserts bit equality between the backends.
"""

from libc.math cimport fabs, sqrt

import numpy as np

BACKEND = "compiled"


def adamw_update(p, g, m, v, double lr, double beta1, double beta2,
                 double eps, double weight_decay,
                 double bias_c1, double bias_c2):
    _adamw_flat(p.reshape(-1), np.ascontiguousarray(g).reshape(-1),
                m.reshape(-1), v.reshape(-1),
                lr, beta1, beta2, eps, weight_decay, bias_c1, bias_c2)


cdef void _adamw_flat(double[::1] p, double[::1] g, double[::1] m,
                      double[::1] v, double lr, double beta1, double beta2,
                      double eps, double weight_decay,
                      double bias_c1, double bias_c2) noexcept:
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double omb1 = 1.0 - beta1
    cdef double omb2 = 1.0 - beta2
    cdef double decay = 1.0 - lr * weight_decay
    for i in range(n):
        m[i] = beta1 * m[i] + omb1 * g[i]
        v[i] = beta2 * v[i] + omb2 * (g[i] * g[i])
        p[i] = p[i] * decay
        p[i] = p[i] - (lr * (m[i] / bias_c1)) / (sqrt(v[i] / bias_c2) + eps)


def subset_sums(weights):
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.zeros(1 << weights.shape[0], dtype=np.float64)
    _subset_sums(weights, out)
    return out


cdef void _subset_sums(double[::1] w, double[::1] out) noexcept:
    cdef Py_ssize_t i, m, base, n = w.shape[0]
    out[0] = 0.0
    for i in range(n):
        base = 1 << i
        for m in range(base):
            out[base + m] = out[m] + w[i]


cdef Py_ssize_t _lower_bound(double[::1] arr, double x) noexcept:
    cdef Py_ssize_t lo = 0, hi = arr.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def min_gap_grid(sums_a, sorted_b, targets):
    sums_a = np.ascontiguousarray(sums_a, dtype=np.float64)
    sorted_b = np.ascontiguousarray(sorted_b, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    out = np.empty(targets.shape[0], dtype=np.float64)
    _min_gap_grid(sums_a, sorted_b, targets, out)
    return out


cdef void _min_gap_grid(double[::1] a, double[::1] b, double[::1] ts,
                        double[::1] out) noexcept:
    cdef Py_ssize_t ti, ai, pos, na = a.shape[0], nb = b.shape[0]
    cdef double t, need, best, cand
    for ti in range(ts.shape[0]):
        t = ts[ti]
        best = -1.0
        for ai in range(na):
            need = t - a[ai]
            pos = _lower_bound(b, need)
            if pos < nb:
                cand = fabs(need - b[pos])
                if best < 0.0 or cand < best:
                    best = cand
            if pos > 0:
                cand = fabs(need - b[pos - 1])
                if best < 0.0 or cand < best:
                    best = cand
        out[ti] = best


def min_gap_closest(sums_a, sorted_b, double target):
    sums_a = np.ascontiguousarray(sums_a, dtype=np.float64)
    sorted_b = np.ascontiguousarray(sorted_b, dtype=np.float64)
    cdef double[::1] a = sums_a
    cdef double[::1] b = sorted_b
    cdef Py_ssize_t ai, pos, lo, hi, best_a = 0, best_b = 0
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    cdef double need, err_lo, err_hi, err, best = -1.0
    for ai in range(na):
        need = target - a[ai]
        pos = _lower_bound(b, need)
        lo = pos - 1
        if lo < 0:
            lo = 0
        hi = pos
        if hi > nb - 1:
            hi = nb - 1
        err_lo = fabs(need - b[lo])
        err_hi = fabs(need - b[hi])
        if err_lo <= err_hi:
            err = err_lo
            pos = lo
        else:
            err = err_hi
            pos = hi
        if best < 0.0 or err < best:
            best = err
            best_a = ai
            best_b = pos
    return best, best_a, best_b
