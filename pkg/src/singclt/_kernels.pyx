# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see ``_kernels_py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs, cosh, asinh

cnp.import_array()

cdef double LN2 = 0.6931471805599453


cdef inline double _logkernel(double a, double x, double u) noexcept nogil:
    # log(cosh(a*u)) - x*cosh(u), overflow-free
    cdef double au = a * u
    return au + log1p(exp(-2.0 * au)) - LN2 - x * cosh(u)


cdef inline double _kernel(double a, double x, double u, double shift) noexcept nogil:
    # exp(_logkernel - shift) with three exponentials instead of five
    cdef double au = a * u, eu
    if au > 300.0:
        return exp(_logkernel(a, x, u) - shift)
    eu = exp(u)
    return 0.5 * (exp(au - shift - 0.5 * x * (eu + 1.0 / eu))
                  + exp(-au - shift - 0.5 * x * (eu + 1.0 / eu)))


cdef double _one(double a, double x, double p, double rtol, int max_level,
                 double *change) noexcept nogil:
    cdef double ustar = asinh(a / x) if a > 0.0 else 0.0
    cdef double shift = _logkernel(a, x, 0.0)
    cdef double s2 = _logkernel(a, x, ustar)
    if s2 > shift:
        shift = s2
    cdef double lo = ustar, hi = ustar + 1.0, mid
    cdef int it
    while _logkernel(a, x, hi) > shift - 60.0:
        hi = ustar + 2.0 * (hi - ustar)
    for it in range(20):
        mid = 0.5 * (lo + hi)
        if _logkernel(a, x, mid) > shift - 60.0:
            lo = mid
        else:
            hi = mid
    cdef double U = hi
    cdef long n = 16, k
    cdef double h = U / n
    cdef double total = 0.5 * (exp(_logkernel(a, x, 0.0) - shift)
                               + exp(_logkernel(a, x, U) - shift))
    for k in range(1, n):
        total += _kernel(a, x, k * h, shift)
    cdef double old = total * h, new = old, odd
    cdef int level
    change[0] = 1.0
    for level in range(max_level):
        odd = 0.0
        h *= 0.5
        for k in range(n):
            odd += _kernel(a, x, (2 * k + 1) * h, shift)
        total += odd
        n *= 2
        new = total * h
        change[0] = fabs(new - old) / new
        if change[0] <= rtol and n >= 32:
            break
        old = new
    return exp(log(new) + shift + p * log(x))


def bessel_k_scaled(double nu, double[::1] x, double p, double rtol=1e-13,
                    int max_level=14):
    """x**p * K_nu(x) for x > 0 by step-halving trapezoid; returns (values, worst change)."""
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double a = fabs(nu), ch, worst = 0.0
    with nogil:
        for i in range(n):
            o[i] = _one(a, x[i], p, rtol, max_level, &ch)
            if ch > worst:
                worst = ch
    return out, worst


def toeplitz_bilinear(double[::1] a, double[::1] b, double[::1] c):
    """sum_{t,s} a[t] b[s] c[|t-s|] by direct O(T^2) summation."""
    cdef Py_ssize_t t, s, n = a.shape[0]
    cdef Py_ssize_t d
    cdef double acc = 0.0, row
    with nogil:
        for t in range(n):
            row = 0.0
            for s in range(n):
                d = t - s if t >= s else s - t
                row += b[s] * c[d]
            acc += a[t] * row
    return acc


cdef double[:, ::1] _lag_matrix(double[::1] c, Py_ssize_t n):
    cdef double[:, ::1] m = np.empty((n, n))
    cdef Py_ssize_t i, k
    for i in range(n):
        for k in range(n):
            m[i, k] = c[i - k if i >= k else k - i]
    return m


def k4_pattern_sum(double[::1] r, double[::1] ca, double[::1] cb, double[::1] cc):
    """Sum over t1..t4 of r1 r2 r3 r4 ca(t1-t2) ca(t3-t4) cb(t1-t3) cb(t2-t4) cc(t1-t4) cc(t2-t3).

    Lag arrays are indexed by absolute lag. Cost is O(T^4); the innermost loop is a
    contiguous dot product over t4.
    """
    cdef Py_ssize_t n = r.shape[0]
    cdef double[:, ::1] A = _lag_matrix(ca, n)
    cdef double[:, ::1] B = _lag_matrix(cb, n)
    cdef double[:, ::1] C = _lag_matrix(cc, n)
    cdef double[::1] y = np.empty(n)
    cdef double[::1] z = np.empty(n)
    cdef Py_ssize_t t1, t2, t3, t4
    cdef double acc = 0.0, w12, w123, s0, s1, s2, s3
    with nogil:
        for t1 in range(n):
            for t4 in range(n):
                y[t4] = r[t4] * C[t1, t4]
            for t2 in range(n):
                w12 = r[t1] * r[t2] * A[t1, t2]
                if w12 == 0.0:
                    continue
                for t4 in range(n):
                    z[t4] = y[t4] * B[t2, t4]
                for t3 in range(n):
                    w123 = w12 * r[t3] * B[t1, t3] * C[t2, t3]
                    if w123 == 0.0:
                        continue
                    s0 = s1 = s2 = s3 = 0.0
                    t4 = 0
                    while t4 + 3 < n:
                        s0 += z[t4] * A[t3, t4]
                        s1 += z[t4 + 1] * A[t3, t4 + 1]
                        s2 += z[t4 + 2] * A[t3, t4 + 2]
                        s3 += z[t4 + 3] * A[t3, t4 + 3]
                        t4 += 4
                    while t4 < n:
                        s0 += z[t4] * A[t3, t4]
                        t4 += 1
                    acc += w123 * ((s0 + s1) + (s2 + s3))
    return acc
