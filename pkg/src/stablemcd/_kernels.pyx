# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: projection outlyingness and rank-one subset updates.

Signatures and semantics match ``stablemcd._fallback``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log, log1p, INFINITY
from libc.stdlib cimport malloc, free
from libcpp.algorithm cimport nth_element

cnp.import_array()

cdef double DENOM_TOL = 1e-12


cdef double _median(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t half = n // 2, i
    cdef double upper, lower
    nth_element(a, a + half, a + n)
    upper = a[half]
    if n % 2:
        return upper
    # after selection every entry left of `half` is <= upper
    lower = a[0]
    for i in range(1, half):
        if a[i] > lower:
            lower = a[i]
    return 0.5 * (lower + upper)


def outlyingness(query_t, ref_t):
    cdef double[:, ::1] q = np.ascontiguousarray(query_t, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(ref_t, dtype=np.float64)
    cdef Py_ssize_t k = q.shape[0], n = q.shape[1], m = r.shape[1]
    cdef Py_ssize_t j, i
    cdef double med, mad, num, ratio
    if r.shape[0] != k:
        raise ValueError("query and reference projections use different direction counts")
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double* buf = <double*> malloc(m * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(k):
                for i in range(m):
                    buf[i] = r[j, i]
                med = _median(buf, m)
                for i in range(m):
                    buf[i] = fabs(r[j, i] - med)
                mad = _median(buf, m)
                for i in range(n):
                    num = fabs(q[j, i] - med)
                    if mad > 0.0:
                        ratio = num / mad
                    elif num > 0.0:
                        ratio = INFINITY
                    else:
                        ratio = 0.0
                    if ratio > out[i]:
                        out[i] = ratio
    finally:
        free(buf)
    return out_arr


cdef int _update(double[::1] mu, double[:, ::1] sigma, double[:, ::1] sinv,
                 double h, const double[::1] y, double* t, double* w,
                 double* dlog) noexcept nogil:
    cdef Py_ssize_t p = mu.shape[0], a, b
    cdef double s = 0.0, denom, scale = (h + 1.0) / h
    for a in range(p):
        mu[a] = mu[a] + (y[a] - mu[a]) / (h + 1.0)
        w[a] = y[a] - mu[a]
    for a in range(p):
        t[a] = 0.0
        for b in range(p):
            t[a] += sinv[a, b] * scale * w[b]
        s += w[a] * t[a]
    denom = h + s
    for a in range(p):
        for b in range(p):
            sigma[a, b] = sigma[a, b] * (h / (h + 1.0)) + w[a] * w[b] / h
    if not (denom > DENOM_TOL) or not (1.0 + s / h > DENOM_TOL):
        return 0
    for a in range(p):
        for b in range(p):
            sinv[a, b] = sinv[a, b] * scale - t[a] * t[b] / denom
    dlog[0] = p * log(h / (h + 1.0)) + log1p(s / h)
    return 1


cdef int _downdate(double[::1] mu, double[:, ::1] sigma, double[:, ::1] sinv,
                   double m, const double[::1] y, double* t, double* w,
                   double* dlog) noexcept nogil:
    cdef Py_ssize_t p = mu.shape[0], a, b
    cdef double s = 0.0, denom, scale = (m - 1.0) / m
    cdef double c = m / ((m - 1.0) * (m - 1.0))
    for a in range(p):
        w[a] = y[a] - mu[a]
    for a in range(p):
        t[a] = 0.0
        for b in range(p):
            t[a] += sinv[a, b] * scale * w[b]
        s += w[a] * t[a]
    denom = 1.0 - c * s
    for a in range(p):
        mu[a] = mu[a] * (m / (m - 1.0)) - y[a] / (m - 1.0)
        for b in range(p):
            sigma[a, b] = sigma[a, b] * (m / (m - 1.0)) - c * w[a] * w[b]
    if not (denom > DENOM_TOL):
        return 0
    for a in range(p):
        for b in range(p):
            sinv[a, b] = sinv[a, b] * scale + (c / denom) * t[a] * t[b]
    dlog[0] = p * log(m / (m - 1.0)) + log(denom)
    return 1


def rank_one_update(double[::1] mu, double[:, ::1] sigma, double[:, ::1] sigma_inv,
                    double h, y):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t p = mu.shape[0]
    cdef double dlog = 0.0
    cdef int ok
    cdef double* t = <double*> malloc(2 * p * sizeof(double) + 1)
    if t == NULL:
        raise MemoryError()
    try:
        with nogil:
            ok = _update(mu, sigma, sigma_inv, h, yv, t, t + p, &dlog)
    finally:
        free(t)
    return (dlog if ok else 0.0), bool(ok)


def rank_one_downdate(double[::1] mu, double[:, ::1] sigma, double[:, ::1] sigma_inv,
                      double h, y):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t p = mu.shape[0]
    cdef double dlog = 0.0
    cdef int ok
    cdef double* t = <double*> malloc(2 * p * sizeof(double) + 1)
    if t == NULL:
        raise MemoryError()
    try:
        with nogil:
            ok = _downdate(mu, sigma, sigma_inv, h, yv, t, t + p, &dlog)
    finally:
        free(t)
    return (dlog if ok else 0.0), bool(ok)


def apply_swaps(double[::1] mu, double[:, ::1] sigma, double[:, ::1] sigma_inv,
                double h, adds, removes):
    cdef const double[:, ::1] ad = np.ascontiguousarray(adds, dtype=np.float64).reshape(-1, mu.shape[0])
    cdef const double[:, ::1] rm = np.ascontiguousarray(removes, dtype=np.float64).reshape(-1, mu.shape[0])
    cdef Py_ssize_t p = mu.shape[0], i
    cdef double total = 0.0, dlog = 0.0, size = h
    cdef int ok = 1
    cdef double* t = <double*> malloc(2 * p * sizeof(double) + 1)
    if t == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(ad.shape[0]):
                ok = _update(mu, sigma, sigma_inv, size, ad[i], t, t + p, &dlog)
                if not ok:
                    break
                total += dlog
                size += 1.0
            if ok:
                for i in range(rm.shape[0]):
                    ok = _downdate(mu, sigma, sigma_inv, size, rm[i], t, t + p, &dlog)
                    if not ok:
                        break
                    total += dlog
                    size -= 1.0
    finally:
        free(t)
    return total, bool(ok)
