"""Pure-NumPy backend for the hot inner-loop kernels."""

import numpy as np

TWO_PI = 2.0 * np.pi


def fft_radix2(x):
    """Radix-2 Cooley-Tukey FFT of a length 2**m sequence (m >= 1).

    Returns the standard DFT values as a complex array.  Implemented as an
    iterative decimation-in-time transform: bit-reversal permutation followed
    by log2(n) butterfly stages.
    """
    x = np.asarray(x)
    n = x.shape[0]
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"fft_radix2 requires a power-of-two length >= 2, got {n}")
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    out = np.asarray(x, dtype=np.complex128)[rev]
    half = 1
    while half < n:
        w = np.exp(-1j * np.pi * np.arange(half) / half)
        blocks = out.reshape(-1, 2 * half)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * w
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        half *= 2
    return out


def biquad_block(x, b0, b1, b2, a1, a2, s1, s2):
    """Run a direct-form-II-transposed biquad over a 1-D block.

    Returns ``(y, s1, s2)`` where the trailing state lets the caller stream
    consecutive blocks.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.empty_like(x)
    for i in range(x.shape[0]):
        xi = x[i]
        yi = b0 * xi + s1
        s1 = b1 * xi - a1 * yi + s2
        s2 = b2 * xi - a2 * yi
        y[i] = yi
    return y, s1, s2


def kernel_vector(train_phis, phi, n_harm):
    """Truncated-Fourier covariance between ``phi`` and each training phase.

    k(a, b) = 2 * sum_{j=1..n} cos(j * (a - b)).
    """
    d = phi - np.asarray(train_phis, dtype=np.float64)
    j = np.arange(1, n_harm + 1, dtype=np.float64)
    return 2.0 * np.cos(np.multiply.outer(d, j)).sum(axis=-1)


def kernel_matrix(phis_a, phis_b, n_harm):
    """Covariance matrix of the truncated-Fourier kernel between two phase sets."""
    a = np.asarray(phis_a, dtype=np.float64)
    b = np.asarray(phis_b, dtype=np.float64)
    d = a[:, None] - b[None, :]
    out = np.zeros_like(d)
    for j in range(1, n_harm + 1):
        out += np.cos(j * d)
    return 2.0 * out


def gp_mean(train_phis, weights, phi, n_harm):
    """Posterior mean of the periodic GP at a single phase."""
    return float(kernel_vector(train_phis, phi, n_harm) @ np.asarray(weights))


def kmeans_assign(phis, centroids):
    """Nearest-centroid labels under the half-angle cosine distance.

    The phase difference is wrapped to (-pi, pi] before the half-angle
    formula d = 1 - cos(delta / 2); ties go to the lowest centroid index.
    """
    phis = np.asarray(phis, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    d = phis[:, None] - centroids[None, :]
    d = np.mod(d + np.pi, TWO_PI) - np.pi
    dist = 1.0 - np.cos(0.5 * d)
    return np.argmin(dist, axis=1).astype(np.int64)


def cross_corr(s, s_hat, max_lag):
    """Lagged inner products R(k) = sum_i s(i) . s_hat(i + k), k in [-L, L].

    Out-of-range indices of ``s_hat`` contribute zero.  ``s`` and ``s_hat``
    must share the same (n, m) shape; returns an array of length 2 L + 1.
    """
    s = np.atleast_2d(np.asarray(s, dtype=np.float64).T).T
    s_hat = np.atleast_2d(np.asarray(s_hat, dtype=np.float64).T).T
    if s.shape != s_hat.shape:
        raise ValueError(f"window shapes differ: {s.shape} vs {s_hat.shape}")
    n = s.shape[0]
    r = np.zeros(2 * max_lag + 1)
    for k in range(-max_lag, max_lag + 1):
        lo = max(0, -k)
        hi = min(n, n - k)
        if hi > lo:
            r[k + max_lag] = float(np.sum(s[lo:hi] * s_hat[lo + k:hi + k]))
    return r
