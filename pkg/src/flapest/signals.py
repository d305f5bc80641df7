"""Sample types, bounded phase stacks, resampling, filtering, cycle averaging.

Shared conventions: timestamps are float seconds, values are float64 NumPy
vectors.  Accel values are specific force in m/s^2, gyro values rad/s, mag
values an unnormalized field vector, GPS values meters / m/s in the inertial
frame (Z up).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._kernels import biquad_block

TWO_PI = 2.0 * math.pi


class Channel(str, Enum):
    ACCEL = "accel"
    GYRO = "gyro"
    MAG = "mag"
    GPS_POS = "gps_pos"
    GPS_VEL = "gps_vel"


@dataclass(eq=False)
class TimedSample:
    """One timestamped sensor reading of a single channel."""

    t: float
    channel: Channel
    value: np.ndarray

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if not math.isfinite(self.t):
            raise ValueError("sample timestamp must be finite")
        if not np.all(np.isfinite(self.value)):
            raise ValueError("sample value must be finite")


class MemoryStack:
    """Bounded FIFO of (phase, value) tuples; oldest entry evicted when full."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._entries = deque(maxlen=capacity)

    def push(self, phi: float, value: float) -> None:
        self._entries.append((phi, value))

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def full(self) -> bool:
        return len(self._entries) == self.capacity

    def as_arrays(self):
        """Return (phases, values) as float64 arrays, oldest first."""
        if not self._entries:
            return np.empty(0), np.empty(0)
        a = np.asarray(self._entries, dtype=np.float64)
        return a[:, 0].copy(), a[:, 1].copy()

    def resize(self, capacity: int) -> None:
        """Change capacity, keeping the newest entries."""
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if capacity != self.capacity:
            self._entries = deque(self._entries, maxlen=capacity)
            self.capacity = capacity


def resample_uniform(stream, f_s: float):
    """Linearly interpolate a timed stream onto the grid t0 + k / f_s.

    The grid spans [t_first, t_last]; no extrapolation beyond the endpoints.
    Raises ValueError for fewer than two samples, non-positive rates, or
    non-monotone timestamps.
    """
    stream = list(stream)
    if len(stream) < 2:
        raise ValueError("resample_uniform needs at least 2 samples")
    if f_s <= 0.0:
        raise ValueError("sampling rate must be positive")
    t = np.array([s.t for s in stream])
    if np.any(np.diff(t) < 0.0):
        raise ValueError("timestamps must be non-decreasing")
    values = np.stack([s.value for s in stream])
    channel = stream[0].channel
    n_out = int(math.floor((t[-1] - t[0]) * f_s + 1e-9)) + 1
    grid = t[0] + np.arange(n_out) / f_s
    out_vals = np.stack(
        [np.interp(grid, t, values[:, i]) for i in range(values.shape[1])], axis=1
    )
    return [TimedSample(float(g), channel, out_vals[i]) for i, g in enumerate(grid)]


def butterworth2_coeffs(f_c: float, f_s: float):
    """Second-order Butterworth low-pass biquad via the prewarped bilinear map.

    Returns (b0, b1, b2, a1, a2) with a0 normalized to 1; unity DC gain.
    """
    if not 0.0 < f_c < 0.5 * f_s:
        raise ValueError(f"cutoff must satisfy 0 < f_c < f_s/2, got {f_c} at {f_s}")
    k = math.tan(math.pi * f_c / f_s)
    a0 = 1.0 + math.sqrt(2.0) * k + k * k
    b0 = k * k / a0
    return (
        b0,
        2.0 * b0,
        b0,
        2.0 * (k * k - 1.0) / a0,
        (1.0 - math.sqrt(2.0) * k + k * k) / a0,
    )


@dataclass
class Biquad:
    """Streaming second-order Butterworth low-pass with zero initial state."""

    f_c: float
    f_s: float
    _s1: float = field(default=0.0, repr=False)
    _s2: float = field(default=0.0, repr=False)

    def __post_init__(self):
        self._coeffs = butterworth2_coeffs(self.f_c, self.f_s)

    def step(self, x: float) -> float:
        b0, b1, b2, a1, a2 = self._coeffs
        y = b0 * x + self._s1
        self._s1 = b1 * x - a1 * y + self._s2
        self._s2 = b2 * x - a2 * y
        return y

    def process(self, x):
        y, self._s1, self._s2 = biquad_block(x, *self._coeffs, self._s1, self._s2)
        return y

    def reset(self) -> None:
        self._s1 = 0.0
        self._s2 = 0.0


def butterworth2_lowpass(signal, f_c: float, f_s: float):
    """Causal second-order Butterworth low-pass of a uniform sequence.

    Accepts a 1-D array or a (samples, channels) array filtered per column.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim == 1:
        return Biquad(f_c, f_s).process(x)
    return np.stack([Biquad(f_c, f_s).process(x[:, i]) for i in range(x.shape[1])], axis=1)


def _window_means(x, lo, hi):
    x = np.asarray(x, dtype=np.float64)
    cs = np.concatenate([[0.0], np.cumsum(x)]) if x.ndim == 1 else np.concatenate(
        [np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)]
    )
    counts = (hi - lo + 1).astype(np.float64)
    if x.ndim == 1:
        return (cs[hi + 1] - cs[lo]) / counts
    return (cs[hi + 1] - cs[lo]) / counts[:, None]


def cycle_window_len(period: float, f_s: float) -> int:
    w = int(math.ceil(period * f_s - 1e-9))
    if w < 1:
        raise ValueError("cycle window must span at least one sample")
    return w


def centered_cycle_average(signal, period: float, f_s: float):
    """Mean over one flapping period centered at each sample (offline oracle).

    The window shrinks symmetrically at the sequence ends; interior samples
    use the full window of ceil(period * f_s) samples.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[0]
    w = cycle_window_len(period, f_s)
    i = np.arange(n)
    half_lo = (w - 1) // 2
    half_hi = w - 1 - half_lo
    shrink = np.maximum(0, np.maximum(half_lo - i, half_hi - (n - 1 - i)))
    lo = i - np.maximum(half_lo - shrink, 0)
    hi = i + np.maximum(half_hi - shrink, 0)
    return _window_means(x, lo, hi)


def trailing_cycle_average(signal, period: float, f_s: float):
    """Mean over the last flapping period ending at each sample (online).

    Carries a half-period delay relative to the centered version; the window
    grows from one sample until full.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[0]
    w = cycle_window_len(period, f_s)
    i = np.arange(n)
    lo = np.maximum(0, i - w + 1)
    return _window_means(x, lo, i)
