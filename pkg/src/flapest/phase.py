"""Flapping-phase tracking: frequency dead reckoning plus correlation correction.

The phase advances as phi <- wrap(phi + 2 pi f dt) between samples and is
nudged once per cycle by cross-correlating the recent selected-signal window
[a_z, w_y] against the learned-pattern predictions on the same grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._kernels import cross_corr

TWO_PI = 2.0 * math.pi


def wrap_angle(x: float) -> float:
    """Wrap to [0, 2 pi)."""
    return x % TWO_PI


def wrap_signed(x):
    """Wrap to [-pi, pi)."""
    return np.mod(np.asarray(x) + np.pi, TWO_PI) - np.pi


@dataclass(frozen=True)
class PhaseState:
    """Flapping phase belief and correction gains."""

    phi: float = 0.0
    t_last: float = 0.0
    phi0: float = 0.0
    k_cc: float = 0.1
    phi_d_bounds: tuple = (-math.pi / 4.0, math.pi / 4.0)

    def __post_init__(self):
        lo, hi = self.phi_d_bounds
        if not (lo <= 0.0 <= hi):
            raise ValueError("phase-correction bounds must bracket zero")
        if not 0.0 < self.k_cc <= 1.0:
            raise ValueError("correction gain must be in (0, 1]")


def advance(state: PhaseState, t_curr: float, f: float) -> PhaseState:
    """Dead-reckon the phase to ``t_curr`` at frequency ``f`` (Hz)."""
    if t_curr < state.t_last:
        raise ValueError("time regression in phase advance")
    phi = wrap_angle(state.phi + TWO_PI * f * (t_curr - state.t_last))
    return replace(state, phi=phi, t_last=t_curr)


def cross_correlation(s, s_hat, max_lag: int):
    """R_cc(k) for k in [-max_lag, max_lag] between one-cycle windows.

    Out-of-range indices contribute zero; mismatched grids raise ValueError.
    """
    return cross_corr(s, s_hat, int(max_lag))


def correct(state: PhaseState, r_cc, f_freq: float, f_s: float) -> PhaseState:
    """Apply the correlation-peak phase correction.

    phi_d = (2 pi f / f_s) * argmax_k R_cc(k), with the peak refined to
    sub-sample resolution by parabolic interpolation (integer-quantized
    corrections limit-cycle against small frequency errors).  The applied
    correction is k_cc * clamp(phi_d, bounds), so no single event moves the
    phase by more than k_cc * bound.
    """
    r_cc = np.asarray(r_cc)
    max_lag = (len(r_cc) - 1) // 2
    p = int(np.argmax(r_cc))
    delta = 0.0
    if 0 < p < len(r_cc) - 1:
        denom = r_cc[p - 1] - 2.0 * r_cc[p] + r_cc[p + 1]
        if denom < 0.0:
            delta = float(np.clip(0.5 * (r_cc[p - 1] - r_cc[p + 1]) / denom,
                                  -0.5, 0.5))
    k_star = p - max_lag + delta
    phi_d = TWO_PI * f_freq / f_s * k_star
    lo, hi = state.phi_d_bounds
    phi = wrap_angle(state.phi + state.k_cc * min(max(phi_d, lo), hi))
    return replace(state, phi=phi)
