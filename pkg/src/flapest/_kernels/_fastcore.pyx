# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the hot inner-loop kernels (see pure.py for contracts)."""

from libc.math cimport cos, sin, pi, atan2, fmod

import numpy as np

cimport numpy as cnp

cnp.import_array()


def fft_radix2(x):
    """Radix-2 Cooley-Tukey FFT of a length 2**m sequence (m >= 1)."""
    cdef cnp.ndarray arr = np.asarray(x)
    cdef Py_ssize_t n = arr.shape[0]
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"fft_radix2 requires a power-of-two length >= 2, got {n}")
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] src = np.ascontiguousarray(
        arr, dtype=np.complex128)
    cdef Py_ssize_t bits = 0
    cdef Py_ssize_t tmp = n
    while tmp > 1:
        bits += 1
        tmp >>= 1
    cdef Py_ssize_t i, j, b, rev
    for i in range(n):
        rev = 0
        for b in range(bits):
            rev |= ((i >> b) & 1) << (bits - 1 - b)
        out[i] = src[rev]
    cdef Py_ssize_t half = 1
    cdef Py_ssize_t start, k
    cdef double ang
    cdef double complex w, ev, od
    while half < n:
        for start in range(0, n, 2 * half):
            for k in range(half):
                ang = -pi * k / half
                w = cos(ang) + 1j * sin(ang)
                ev = out[start + k]
                od = out[start + k + half] * w
                out[start + k] = ev + od
                out[start + k + half] = ev - od
        half *= 2
    return out


def biquad_block(x, double b0, double b1, double b2, double a1, double a2,
                 double s1, double s2):
    """Direct-form-II-transposed biquad over a block; returns (y, s1, s2)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xin = np.ascontiguousarray(
        x, dtype=np.float64)
    cdef Py_ssize_t n = xin.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n)
    cdef Py_ssize_t i
    cdef double xi, yi
    for i in range(n):
        xi = xin[i]
        yi = b0 * xi + s1
        s1 = b1 * xi - a1 * yi + s2
        s2 = b2 * xi - a2 * yi
        y[i] = yi
    return y, s1, s2


def kernel_vector(train_phis, double phi, int n_harm):
    """k(phi, phi_i) = 2 sum_{j<=n} cos(j (phi - phi_i)) for each training phase."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] phis = np.ascontiguousarray(
        train_phis, dtype=np.float64)
    cdef Py_ssize_t m = phis.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m)
    cdef Py_ssize_t i
    cdef int j
    cdef double d, acc
    for i in range(m):
        d = phi - phis[i]
        acc = 0.0
        for j in range(1, n_harm + 1):
            acc += cos(j * d)
        out[i] = 2.0 * acc
    return out


def kernel_matrix(phis_a, phis_b, int n_harm):
    """Truncated-Fourier kernel matrix between two phase sets."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(
        phis_a, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.ascontiguousarray(
        phis_b, dtype=np.float64)
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((na, nb))
    cdef Py_ssize_t i, k
    cdef int j
    cdef double d, acc
    for i in range(na):
        for k in range(nb):
            d = a[i] - b[k]
            acc = 0.0
            for j in range(1, n_harm + 1):
                acc += cos(j * d)
            out[i, k] = 2.0 * acc
    return out


def gp_mean(train_phis, weights, double phi, int n_harm):
    """Posterior mean of the periodic GP at a single phase."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] phis = np.ascontiguousarray(
        train_phis, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(
        weights, dtype=np.float64)
    cdef Py_ssize_t m = phis.shape[0]
    cdef Py_ssize_t i
    cdef int j
    cdef double d, acc, total = 0.0
    for i in range(m):
        d = phi - phis[i]
        acc = 0.0
        for j in range(1, n_harm + 1):
            acc += cos(j * d)
        total += 2.0 * acc * w[i]
    return total


def kmeans_assign(phis, centroids):
    """Nearest-centroid labels under the wrapped half-angle cosine distance."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(
        phis, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(
        centroids, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t k = c.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, j, best
    cdef double d, dist, best_dist, two_pi = 2.0 * pi
    for i in range(n):
        best = 0
        best_dist = 1e300
        for j in range(k):
            d = fmod(p[i] - c[j] + pi, two_pi)
            if d < 0.0:
                d += two_pi
            d -= pi
            dist = 1.0 - cos(0.5 * d)
            if dist < best_dist:
                best_dist = dist
                best = j
        labels[i] = best
    return labels


def cross_corr(s, s_hat, int max_lag):
    """Lagged inner products with zero padding; see pure.cross_corr."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(
        np.atleast_2d(np.asarray(s, dtype=np.float64).T).T)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(
        np.atleast_2d(np.asarray(s_hat, dtype=np.float64).T).T)
    if a.shape[0] != b.shape[0] or a.shape[1] != b.shape[1]:
        raise ValueError(
            f"window shapes differ: {(<object>a).shape} vs {(<object>b).shape}")
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.zeros(2 * max_lag + 1)
    cdef Py_ssize_t k, i, j, lo, hi
    cdef double acc
    for k in range(-max_lag, max_lag + 1):
        lo = 0 if -k < 0 else -k
        hi = n if n - k > n else n - k
        acc = 0.0
        for i in range(lo, hi):
            for j in range(m):
                acc += a[i, j] * b[i + k, j]
        r[k + max_lag] = acc
    return r
