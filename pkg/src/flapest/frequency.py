"""Sliding-window FFT flapping-frequency tracking with Gaussian fusion.

A Hann-windowed radix-2 FFT runs over the vertical acceleration and pitch
rate streams; the band-limited spectral peaks of both are fused
(product-of-Gaussians) into one frequency belief, then smoothed over a short
horizon with a moving least-squares quadratic fit.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ._kernels import fft_radix2

__all__ = [
    "FrequencyEstimate",
    "FrequencyTracker",
    "Spectrum",
    "band_peak",
    "estimate_variance",
    "fft_radix2",
    "fuse_gaussian",
    "spectrum_from_window",
]


@dataclass(frozen=True)
class FrequencyEstimate:
    """Gaussian belief over the flapping frequency at time ``t``."""

    f_freq: float
    var_freq: float
    t: float


@dataclass(eq=False)
class Spectrum:
    """One-sided magnitude spectrum of a real windowed block."""

    bin_freqs: np.ndarray
    magnitudes: np.ndarray
    window_len: int
    f_s: float

    @property
    def bin_spacing(self) -> float:
        return self.f_s / self.window_len


def hann_window(n: int):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def spectrum_from_window(samples, f_s: float, windowed: bool = True) -> Spectrum:
    """One-sided magnitude spectrum of a real block (Hann window by default)."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[0]
    if windowed:
        x = x * hann_window(n)
    spec = fft_radix2(x)
    half = n // 2 + 1
    return Spectrum(
        bin_freqs=np.arange(half) * (f_s / n),
        magnitudes=np.abs(spec[:half]),
        window_len=n,
        f_s=f_s,
    )


def band_peak(spectrum: Spectrum, f_lo: float = 1.0, f_hi: float = 8.0):
    """In-band magnitude peak refined by parabolic interpolation.

    Returns (peak_freq, peak_mag).  Ties break toward the lower frequency.
    Raises ValueError when the band misses the spectrum support or the band
    is identically zero.
    """
    if f_lo >= f_hi:
        raise ValueError("band must satisfy f_lo < f_hi")
    freqs = spectrum.bin_freqs
    mags = spectrum.magnitudes
    in_band = np.nonzero((freqs >= f_lo) & (freqs <= f_hi))[0]
    if in_band.size == 0:
        raise ValueError("band does not intersect the spectrum support")
    if not np.any(mags[in_band] > 0.0):
        raise ValueError("no spectral peak: band magnitudes are all zero")
    p = int(in_band[np.argmax(mags[in_band])])
    delta = 0.0
    peak_mag = float(mags[p])
    if 0 < p < len(mags) - 1:
        ml, m0, mr = float(mags[p - 1]), float(mags[p]), float(mags[p + 1])
        if ml > 0.0 and mr > 0.0:
            # log-magnitude parabola: near-unbiased for windowed sinusoids
            ml, m0, mr = math.log(ml), math.log(m0), math.log(mr)
        denom = ml - 2.0 * m0 + mr
        if denom < 0.0:
            delta = float(np.clip(0.5 * (ml - mr) / denom, -0.5, 0.5))
            peak_mag = float(mags[p]) - 0.25 * (float(mags[p - 1]) - float(mags[p + 1])) * delta
    return (p + delta) * spectrum.bin_spacing, peak_mag


def estimate_variance(spectrum: Spectrum, peak_freq: float) -> float:
    """Frequency variance from the second central moment around the peak.

    Normalized magnitudes within two bins of the peak form the mass
    function; the result is floored at (bin spacing)^2 / 12, the variance of
    a uniform density over one bin.
    """
    df = spectrum.bin_spacing
    floor = df * df / 12.0
    p = int(round(peak_freq / df))
    lo = max(0, p - 2)
    hi = min(len(spectrum.magnitudes) - 1, p + 2)
    m = spectrum.magnitudes[lo:hi + 1]
    total = float(np.sum(m))
    if total <= 0.0:
        return floor
    f = spectrum.bin_freqs[lo:hi + 1]
    w = m / total
    mu = float(np.sum(w * f))
    var = float(np.sum(w * (f - mu) ** 2))
    return max(var, floor)


def fuse_gaussian(e_a: FrequencyEstimate, e_w: FrequencyEstimate) -> FrequencyEstimate:
    """Product-of-Gaussians fusion of two frequency beliefs."""
    if e_a.var_freq <= 0.0 or e_w.var_freq <= 0.0:
        raise ValueError("fusion requires positive variances")
    pa = 1.0 / e_a.var_freq
    pw = 1.0 / e_w.var_freq
    var = 1.0 / (pa + pw)
    return FrequencyEstimate(
        f_freq=(pa * e_a.f_freq + pw * e_w.f_freq) * var,
        var_freq=var,
        t=max(e_a.t, e_w.t),
    )


class FrequencyTracker:
    """Streams grid samples of (a_z, w_y) and maintains the fused belief.

    Every ``hop`` pushes (once the window is full) both channels are
    transformed, band peaks extracted and fused; the reported mean is a
    moving least-squares quadratic fit over the last ``smooth_horizon``
    seconds, clamped to the search band.
    """

    def __init__(self, f_s: float, window_len: int = 512, hop: int = 32,
                 f_lo: float = 1.0, f_hi: float = 8.0, smooth_horizon: float = 1.0):
        if window_len < 2 or (window_len & (window_len - 1)) != 0:
            raise ValueError("window_len must be a power of two")
        self.f_s = f_s
        self.window_len = window_len
        self.hop = hop
        self.f_lo = f_lo
        self.f_hi = f_hi
        self.smooth_horizon = smooth_horizon
        self._az = deque(maxlen=window_len)
        self._wy = deque(maxlen=window_len)
        self._since_fft = 0
        self._history = deque()
        self._estimate = None
        self.last_spectra = None

    def push(self, t: float, a_z: float, w_y: float):
        """Ingest one grid tick; returns the new estimate or None."""
        self._az.append(a_z)
        self._wy.append(w_y)
        self._since_fft += 1
        if len(self._az) < self.window_len or self._since_fft < self.hop:
            return None
        self._since_fft = 0
        spec_a = spectrum_from_window(np.asarray(self._az), self.f_s)
        spec_w = spectrum_from_window(np.asarray(self._wy), self.f_s)
        self.last_spectra = (t, spec_a, spec_w)
        fused = None
        for spec in (spec_a, spec_w):
            try:
                f_pk, _ = band_peak(spec, self.f_lo, self.f_hi)
            except ValueError:
                continue
            est = FrequencyEstimate(f_pk, estimate_variance(spec, f_pk), t)
            fused = est if fused is None else fuse_gaussian(fused, est)
        if fused is None:
            return self._estimate
        self._history.append((t, fused.f_freq, fused.var_freq))
        while self._history and self._history[0][0] < t - self.smooth_horizon:
            self._history.popleft()
        self._estimate = FrequencyEstimate(self._smoothed(t), fused.var_freq, t)
        return self._estimate

    def _smoothed(self, t: float) -> float:
        pts = np.asarray(self._history)
        if pts.shape[0] < 3:
            f = pts[-1, 1]
        else:
            # quadratic least squares over the horizon, evaluated at t
            tt = pts[:, 0] - t
            coeff = np.polyfit(tt, pts[:, 1], 2)
            f = float(np.polyval(coeff, 0.0))
        return float(np.clip(f, self.f_lo, self.f_hi))

    @property
    def estimate(self):
        return self._estimate
