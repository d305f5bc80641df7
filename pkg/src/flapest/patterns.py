"""Online periodic-pattern learning on the phase circle.

Per scalar channel: detrend the stacked observations, select representative
points by spherical k-means on phase, then regress with a Gaussian process
whose covariance is the truncated-Fourier reproducing kernel
k(a, b) = 2 sum_{j<=n} cos(j (a - b)).  Predictions are zero-mean periodic
functions of phase with pointwise variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._kernels import gp_mean, kernel_matrix, kernel_vector, kmeans_assign
from .phase import wrap_angle, wrap_signed

TWO_PI = 2.0 * math.pi

__all__ = [
    "ClusterSet",
    "PeriodicPattern",
    "PhaseSample",
    "cluster_cost",
    "cosine_distance",
    "detrend",
    "fit",
    "fourier_features",
    "kernel",
    "kmeans_fit",
    "kmeans_fit_arrays",
    "pattern_grid",
    "predict",
    "subtract_pattern",
]


@dataclass(frozen=True)
class PhaseSample:
    """One (phase, value) observation."""

    phi: float
    y: float


@dataclass(eq=False)
class ClusterSet:
    """Spherical k-means result: wrapped centroids with per-cluster statistics."""

    centroids: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    counts: np.ndarray

    @property
    def k(self) -> int:
        return len(self.centroids)


@dataclass(eq=False)
class PeriodicPattern:
    """Fitted periodic GP: training phases, dual weights, removed mean.

    ``weights`` solves (K + sigma_n^2 I) w = Y_osc; ``chol`` caches the
    factorization for variance queries.  Predictions are 2 pi periodic by
    construction.
    """

    train_phis: np.ndarray
    weights: np.ndarray
    removed_mean: float
    n_harm: int
    sigma_n2: float
    chol: object = None
    _harmonics: tuple = None

    @classmethod
    def zero(cls, n_harm: int = 5):
        """Pattern that predicts identically zero (the bootstrap state)."""
        return cls(
            train_phis=np.empty(0),
            weights=np.empty(0),
            removed_mean=0.0,
            n_harm=n_harm,
            sigma_n2=0.0,
        )

    @property
    def is_zero(self) -> bool:
        return self.train_phis.size == 0

    def harmonics(self):
        """Sine/cosine coefficients (s_j, c_j), j = 1..n, of the GP mean."""
        if self._harmonics is None:
            s = np.zeros(self.n_harm)
            c = np.zeros(self.n_harm)
            for j in range(1, self.n_harm + 1):
                s[j - 1] = 2.0 * float(np.sum(self.weights * np.sin(j * self.train_phis)))
                c[j - 1] = 2.0 * float(np.sum(self.weights * np.cos(j * self.train_phis)))
            self._harmonics = (s, c)
        return self._harmonics


def detrend(y):
    """Remove the mean: returns (y - mean(y), mean(y))."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("cannot detrend an empty array")
    mean = float(np.mean(y))
    return y - mean, mean


def cosine_distance(phi1, phi2):
    """Half-angle cosine distance 1 - cos(wrap(phi1 - phi2) / 2) in [0, 2].

    The difference is wrapped to [-pi, pi) first so that phases identified
    modulo 2 pi have distance zero.
    """
    return 1.0 - np.cos(0.5 * wrap_signed(np.asarray(phi1) - np.asarray(phi2)))


def fourier_features(phi: float, n_harm: int):
    """Truncated Fourier feature vector [sin phi, cos phi, ..., sin n phi, cos n phi]."""
    if n_harm < 1:
        raise ValueError("n_harm must be >= 1")
    j = np.arange(1, n_harm + 1)
    out = np.empty(2 * n_harm)
    out[0::2] = np.sin(j * phi)
    out[1::2] = np.cos(j * phi)
    return out


def kernel(phi_a, phi_b, n_harm: int):
    """Reproducing kernel 2 sum_{j<=n} cos(j (phi_a - phi_b))."""
    if n_harm < 1:
        raise ValueError("n_harm must be >= 1")
    d = np.asarray(phi_a, dtype=np.float64) - np.asarray(phi_b, dtype=np.float64)
    out = np.zeros_like(d)
    for j in range(1, n_harm + 1):
        out = out + np.cos(j * d)
    return 2.0 * out if out.ndim else float(2.0 * out)


def cluster_cost(phis, centroids, labels=None):
    """K-means objective: summed cosine distance of samples to their centroid."""
    phis = np.asarray(phis, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    if labels is None:
        labels = kmeans_assign(phis, centroids)
    return float(np.sum(cosine_distance(phis, centroids[labels])))


def _centroid_update(phis, centroid):
    # exact minimizer of the half-angle cosine cost within the wrap branch
    delta = wrap_signed(phis - centroid)
    z = np.exp(0.5j * delta).sum()
    if z == 0:
        return centroid
    return wrap_angle(centroid + 2.0 * float(np.angle(z)))


def kmeans_fit_arrays(phis, ys, k: int, max_iter: int = 50) -> ClusterSet:
    """Lloyd iteration on the phase circle from uniformly spaced seeds.

    Assign by cosine distance, update each centroid to the circular mean of
    its members; empty clusters re-seed at the largest cluster's antipode.
    Stops at an assignment fixpoint or ``max_iter``; the objective is
    non-increasing across iterations.
    """
    phis = np.mod(np.asarray(phis, dtype=np.float64), TWO_PI)
    ys = np.asarray(ys, dtype=np.float64)
    if phis.shape != ys.shape:
        raise ValueError("phase and value arrays must have equal length")
    n = phis.size
    if n < k:
        raise ValueError(f"need at least k={k} samples, got {n}")
    centroids = np.arange(k) * (TWO_PI / k)
    labels = kmeans_assign(phis, centroids)
    for _ in range(max_iter):
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c] == 0:
                centroids[c] = wrap_angle(centroids[int(np.argmax(counts))] + math.pi)
            else:
                centroids[c] = _centroid_update(phis[labels == c], centroids[c])
        new_labels = kmeans_assign(phis, centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    order = np.argsort(centroids, kind="stable")
    centroids = centroids[order]
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    labels = remap[labels]
    means = np.zeros(k)
    variances = np.zeros(k)
    counts = np.bincount(labels, minlength=k)
    for c in range(k):
        if counts[c]:
            member = ys[labels == c]
            means[c] = float(np.mean(member))
            variances[c] = float(np.var(member))
    return ClusterSet(centroids=centroids, means=means, variances=variances, counts=counts)


def kmeans_fit(samples, k: int, max_iter: int = 50) -> ClusterSet:
    """As kmeans_fit_arrays, from a sequence of PhaseSample."""
    phis = np.array([s.phi for s in samples])
    ys = np.array([s.y for s in samples])
    return kmeans_fit_arrays(phis, ys, k, max_iter)


def fit(clusters: ClusterSet, n_harm: int, sigma_n2: float = None,
        var_floor_rel: float = 1e-6) -> PeriodicPattern:
    """Fit the periodic GP on cluster means with cluster-variance noise.

    sigma_n^2 defaults to the mean per-cluster variance, floored at
    ``var_floor_rel`` times the signal variance.  The SPD system
    (K + sigma_n^2 I) w = Y_osc is solved by Cholesky with jitter escalation;
    an irrecoverably ill-conditioned system raises LinAlgError.
    """
    occupied = clusters.counts > 0
    phis = np.asarray(clusters.centroids, dtype=np.float64)[occupied]
    y = np.asarray(clusters.means, dtype=np.float64)[occupied]
    y_osc, removed = detrend(y)
    if sigma_n2 is None:
        signal_var = float(np.var(y))
        sigma_n2 = max(float(np.mean(clusters.variances[occupied])),
                       var_floor_rel * signal_var, 1e-12)
    k_mat = kernel_matrix(phis, phis, n_harm)
    eye = np.eye(len(phis))
    chol = None
    for jitter in (0.0, 1e-10, 1e-8, 1e-6):
        a = k_mat + (sigma_n2 + jitter * 2.0 * n_harm) * eye
        try:
            chol = cho_factor(a, lower=True)
        except np.linalg.LinAlgError:
            continue
        diag = np.diag(chol[0])
        if np.min(diag) > 0 and (np.max(diag) / np.min(diag)) ** 2 < 1e12:
            break
        chol = None
    if chol is None:
        raise np.linalg.LinAlgError("kernel system is irrecoverably ill-conditioned")
    w = cho_solve(chol, y_osc)
    resid = float(np.linalg.norm(a @ w - y_osc))
    if resid > 1e-8 * max(float(np.linalg.norm(y_osc)), 1e-300):
        raise np.linalg.LinAlgError("kernel solve residual exceeds tolerance")
    return PeriodicPattern(
        train_phis=phis, weights=w, removed_mean=removed,
        n_harm=n_harm, sigma_n2=sigma_n2, chol=chol,
    )


def predict(pattern: PeriodicPattern, phi_star: float):
    """Posterior (mean, variance) of the oscillation at phase ``phi_star``."""
    if pattern.is_zero:
        return 0.0, 2.0 * pattern.n_harm
    k_vec = kernel_vector(pattern.train_phis, phi_star, pattern.n_harm)
    mean = float(k_vec @ pattern.weights)
    var = 2.0 * pattern.n_harm - float(k_vec @ cho_solve(pattern.chol, k_vec))
    return mean, max(var, 0.0)


def predict_mean(pattern: PeriodicPattern, phi_star: float) -> float:
    """Posterior mean only (hot path)."""
    if pattern.is_zero:
        return 0.0
    return gp_mean(pattern.train_phis, pattern.weights, phi_star, pattern.n_harm)


def subtract_pattern(value: float, pattern: PeriodicPattern, phi: float) -> float:
    """Remove the learned oscillation at phase ``phi`` from a raw value."""
    return value - predict_mean(pattern, phi)


def pattern_grid(pattern: PeriodicPattern, n: int = 256):
    """Evaluate (phi, mean, std) on a uniform phase grid for export."""
    phis = np.arange(n) * (TWO_PI / n)
    means = np.empty(n)
    stds = np.empty(n)
    for i, p in enumerate(phis):
        m, v = predict(pattern, float(p))
        means[i] = m
        stds[i] = math.sqrt(max(v, 0.0))
    return phis, means, stds
