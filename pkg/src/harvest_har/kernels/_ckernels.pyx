# cython: language_level=3
"""Compiled sliding-window kernels.

Same contracts as ``_pykernels``; see that module for the reference semantics.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef void _prefix_moments(const double[::1] x, double shift,
                          double[::1] s1, double[::1] s2) noexcept nogil:
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double v
    s1[0] = 0.0
    s2[0] = 0.0
    for i in range(n):
        v = x[i] - shift
        s1[i + 1] = s1[i] + v
        s2[i + 1] = s2[i] + v * v


# see NEAR_ZERO_VAR in _pykernels
cdef double NEAR_ZERO_VAR = 1e-9


cdef double _direct_var(const double[::1] x, double shift, Py_ssize_t j, Py_ssize_t w) noexcept nogil:
    cdef Py_ssize_t i
    cdef double mu = 0.0, acc = 0.0, v
    for i in range(j, j + w):
        mu += x[i] - shift
    mu /= w
    for i in range(j, j + w):
        v = x[i] - shift - mu
        acc += v * v
    return acc / w


cdef void _window_mean_std(const double[::1] x, const double[::1] s1, const double[::1] s2,
                           double shift, Py_ssize_t w, Py_ssize_t m,
                           double[:, ::1] out, int col_mean, int col_std) noexcept nogil:
    cdef Py_ssize_t j
    cdef double a, b, mu, var
    for j in range(m):
        a = s1[j + w] - s1[j]
        b = s2[j + w] - s2[j]
        mu = a / w
        var = b / w - mu * mu
        if var < NEAR_ZERO_VAR * s2[j + w] / w:
            var = _direct_var(x, shift, j, w)
        if var < 0.0:
            var = 0.0
        if col_mean >= 0:
            out[j, col_mean] = mu + shift
        out[j, col_std] = sqrt(var)


cdef void _window_extrema(const double[::1] x, Py_ssize_t q, Py_ssize_t m,
                          Py_ssize_t[::1] dq_min, Py_ssize_t[::1] dq_max,
                          double[:, ::1] out) noexcept nogil:
    # monotone deques; indices are stored in a ring-free array since each
    # index is pushed exactly once
    cdef Py_ssize_t i, n = x.shape[0]
    cdef Py_ssize_t hmin = 0, tmin = 0, hmax = 0, tmax = 0
    for i in range(n):
        while tmin > hmin and x[dq_min[tmin - 1]] >= x[i]:
            tmin -= 1
        dq_min[tmin] = i
        tmin += 1
        while tmax > hmax and x[dq_max[tmax - 1]] <= x[i]:
            tmax -= 1
        dq_max[tmax] = i
        tmax += 1
        if i >= q - 1:
            if dq_min[hmin] <= i - q:
                hmin += 1
            if dq_max[hmax] <= i - q:
                hmax += 1
            out[i - q + 1, 2] = x[dq_min[hmin]]
            out[i - q + 1, 3] = x[dq_max[hmax]]


def rolling_window_stats(x, Py_ssize_t q):
    """Per-window mean, std, min, max and first-difference std.

    Row ``j`` describes ``x[j:j + q]``; returns an array of shape ``(N - q + 1, 5)``.
    """
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    if q < 2:
        raise ValueError("window length must be at least 2")
    cdef Py_ssize_t m = n - q + 1
    if m <= 0:
        return np.empty((0, 5), dtype=np.float64)

    out_arr = np.empty((m, 5), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] s1 = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] s2 = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] d = np.empty(n - 1, dtype=np.float64)
    cdef Py_ssize_t[::1] dq_min = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] dq_max = np.empty(n, dtype=np.intp)
    cdef double shift = 0.0, dshift = 0.0
    cdef Py_ssize_t i

    with nogil:
        for i in range(n):
            shift += xv[i]
        shift /= n
        _prefix_moments(xv, shift, s1, s2)
        _window_mean_std(xv, s1, s2, shift, q, m, out, 0, 1)
        _window_extrema(xv, q, m, dq_min, dq_max, out)
        for i in range(n - 1):
            d[i] = xv[i + 1] - xv[i]
            dshift += d[i]
        dshift /= n - 1
        _prefix_moments(d, dshift, s1[:n], s2[:n])
        _window_mean_std(d, s1, s2, dshift, q - 1, m, out, -1, 4)
    return out_arr


def rolling_mean(x, Py_ssize_t w):
    """Mean of every length-``w`` window of ``x``; shape ``(N - w + 1,)``."""
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    if w < 1:
        raise ValueError("window length must be positive")
    cdef Py_ssize_t m = n - w + 1
    if m <= 0:
        return np.empty(0, dtype=np.float64)
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] s1 = np.empty(n + 1, dtype=np.float64)
    cdef Py_ssize_t i
    with nogil:
        s1[0] = 0.0
        for i in range(n):
            s1[i + 1] = s1[i] + xv[i]
        for i in range(m):
            out[i] = (s1[i + w] - s1[i]) / w
    return out_arr
