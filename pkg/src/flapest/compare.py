"""Attitude-estimator comparison harness over one estimated flight.

Replays the grid signals stored by the estimate step through four baselines
(raw-input EKF, trailing-average EKF, centered-average EKF, fixed-gain
complementary filter), scores each against the truth log, and measures the
alignment latency of each conditioning scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attitude import AttitudeEkf, ComplementaryFilter, GpsAccelEstimator
from .pipeline import PipelineConfig
from .rotations import quat_from_euler, quat_to_euler, quat_angle_error
from .signals import centered_cycle_average, trailing_cycle_average

METHODS = ("proposed", "raw_ekf", "trailing_ekf", "centered_ekf", "complementary")


@dataclass
class MethodMetrics:
    method: str
    rms_roll_deg: float
    rms_pitch_deg: float
    rms_yaw_deg: float
    rms_angle_deg: float
    latency_ticks: int
    osc_pitch_lag: int


@dataclass(eq=False)
class GridData:
    """Inputs replayed by the baselines (everything the estimate step saw)."""

    t: np.ndarray
    raw_accel: np.ndarray
    raw_gyro: np.ndarray
    free_accel: np.ndarray
    free_gyro: np.ndarray
    f_flap: float
    mag: list          # (t, 3-vector)
    gps_vel: list      # (t, 3-vector)
    q_proposed: np.ndarray
    q_reconstructed: np.ndarray


def run_ekf_on(grid: GridData, accel: np.ndarray, gyro: np.ndarray,
               config: PipelineConfig):
    """Drive the standard attitude EKF over prepared grid inputs."""
    ekf = AttitudeEkf(config.attitude_noise, mag_ref=config.mag_ref())
    gacc = GpsAccelEstimator(config.gps_accel_cutoff, config.gps_rate)
    dt = 1.0 / config.f_s
    mi = gi = 0
    out = np.empty((len(grid.t), 4))
    for i, t in enumerate(grid.t):
        while gi < len(grid.gps_vel) and grid.gps_vel[gi][0] <= t:
            gacc.push(*grid.gps_vel[gi])
            gi += 1
        while mi < len(grid.mag) and grid.mag[mi][0] <= t:
            if ekf._initialized:
                ekf.update_mag(grid.mag[mi][1])
            mi += 1
        if not ekf._initialized:
            ekf.initialize_from(accel[i], grid.mag[mi - 1][1] if mi else None)
        ekf.predict(gyro[i], dt)
        a_dyn, _ = gacc.current(t)
        ekf.update_accel(accel[i], a_dyn)
        out[i] = ekf.state.q
    return out


def run_complementary_on(grid: GridData, config: PipelineConfig):
    comp = ComplementaryFilter(g=config.attitude_noise.g, mag_ref=config.mag_ref())
    dt = 1.0 / config.f_s
    mi = 0
    out = np.empty((len(grid.t), 4))
    for i, t in enumerate(grid.t):
        mag = None
        while mi < len(grid.mag) and grid.mag[mi][0] <= t:
            mag = grid.mag[mi][1]
            mi += 1
        comp.step(grid.raw_gyro[i], grid.raw_accel[i], dt, mag)
        out[i] = comp.q
    return out


def alignment_lag(x, ref, max_lag: int):
    """Cross-correlation peak lag of ``x`` relative to ``ref`` (in samples).

    Positive lag means ``x`` trails ``ref``.
    """
    x = np.asarray(x) - np.mean(x)
    ref = np.asarray(ref) - np.mean(ref)
    n = len(x)
    c = np.correlate(x, ref, "full")
    lags = np.arange(-(n - 1), n)
    keep = np.abs(lags) <= max_lag
    return int(lags[keep][np.argmax(c[keep])])


def conditioning_delay(x, ref, max_lag: int):
    """Slow-signal transport delay of ``x`` vs ``ref``, in samples.

    Parabolic refinement of the cross-correlation peak; exact for pure
    delays and energy-weighted, so narrowband ripple cannot masquerade as
    broadband delay.  Positive means ``x`` trails ``ref``.  Callers must
    pass oscillation-free (slow) signals.
    """
    x = np.asarray(x, dtype=np.float64) - np.mean(x)
    ref = np.asarray(ref, dtype=np.float64) - np.mean(ref)
    n = len(x)
    c = np.correlate(x, ref, "full")
    lags = np.arange(-(n - 1), n)
    keep = np.abs(lags) <= max_lag
    c = c[keep]
    lags = lags[keep]
    p = int(np.argmax(c))
    delta = 0.0
    if 0 < p < len(c) - 1:
        denom = c[p - 1] - 2.0 * c[p] + c[p + 1]
        if denom < 0.0:
            delta = float(np.clip(0.5 * (c[p - 1] - c[p + 1]) / denom, -0.5, 0.5))
    return float(lags[p]) + delta


def oscillatory_part(x, period: float, f_s: float):
    return np.asarray(x) - centered_cycle_average(x, period, f_s)


def evaluate(grid: GridData, truth, config: PipelineConfig,
             warmup: float = 15.0):
    """Score all methods; returns (list of MethodMetrics, extras dict).

    ``truth`` is the dict of truth columns (see logio.read_truth).
    """
    f_s = config.f_s
    # quantize the averaging window to whole ticks; a one-tick mismatch
    # leaves percent-level flapping residue in every averaged signal
    period = max(1.0, round(f_s / grid.f_flap)) / f_s
    t = grid.t
    if len(t) < 10:
        raise ValueError("too few grid rows to score")
    theta_i = np.interp(t, truth["t"], truth["theta"])
    roll_i = np.interp(t, truth["t"], truth["roll"])
    q_true = np.array([quat_from_euler(roll_i[i], theta_i[i], 0.0)
                       for i in range(len(t))])
    span = t[-1] - t[0]
    warmup = min(warmup, 0.5 * span)
    seg = t >= (t[0] + warmup)

    trailing_a = trailing_cycle_average(grid.raw_accel, period, f_s)
    trailing_g = trailing_cycle_average(grid.raw_gyro, period, f_s)
    centered_a = centered_cycle_average(grid.raw_accel, period, f_s)
    centered_g = centered_cycle_average(grid.raw_gyro, period, f_s)

    attitudes = {
        "proposed": grid.q_proposed,
        "raw_ekf": run_ekf_on(grid, grid.raw_accel, grid.raw_gyro, config),
        "trailing_ekf": run_ekf_on(grid, trailing_a, trailing_g, config),
        "centered_ekf": run_ekf_on(grid, centered_a, centered_g, config),
        "complementary": run_complementary_on(grid, config),
    }

    # conditioning latency: transport delay of each method's (smooth) accel
    # input against the centered average; trailing averaging shows its
    # half-cycle delay here, the oscillation-free path shows none.  Raw
    # inputs are pre-smoothed so the flapping band cannot bias the peak.
    half_cycle = int(math.ceil(f_s / (2.0 * grid.f_flap)))
    ref_az = centered_a[seg, 2]
    # signals still carrying flapping-band content (raw, oscillation-free
    # residue) are pre-smoothed so band leakage cannot ripple the
    # correlation; the averaged baselines are already smooth
    raw_slow = centered_cycle_average(grid.raw_accel[:, 2], period, f_s)[seg]
    free_slow = centered_cycle_average(grid.free_accel[:, 2], period, f_s)[seg]
    input_az = {
        "proposed": free_slow,
        "raw_ekf": raw_slow,
        "trailing_ekf": trailing_a[seg, 2],
        "centered_ekf": centered_a[seg, 2],
        "complementary": raw_slow,
    }

    osc_true = oscillatory_part(theta_i, period, f_s)[seg]
    metrics = []
    extras = {"oscillation_free_az": grid.free_accel[:, 2]}
    for name in METHODS:
        q_est = attitudes[name]
        err_angle = np.array([quat_angle_error(q_est[i], q_true[i])
                              for i in range(len(t))])
        eul = np.array([quat_to_euler(q_est[i]) for i in range(len(t))])
        err_roll = np.degrees(eul[seg, 0] - roll_i[seg])
        err_pitch = np.degrees(eul[seg, 1] - theta_i[seg])
        err_yaw = np.degrees(np.mod(eul[seg, 2] + math.pi, 2 * math.pi) - math.pi)
        if name == "proposed":
            osc_est = oscillatory_part(
                np.array([quat_to_euler(q)[1] for q in grid.q_reconstructed]),
                period, f_s)[seg]
        else:
            osc_est = oscillatory_part(eul[:, 1], period, f_s)[seg]
        lat = conditioning_delay(input_az[name], ref_az, 3 * half_cycle)
        metrics.append(MethodMetrics(
            method=name,
            rms_roll_deg=float(np.sqrt(np.mean(err_roll ** 2))),
            rms_pitch_deg=float(np.sqrt(np.mean(err_pitch ** 2))),
            rms_yaw_deg=float(np.sqrt(np.mean(err_yaw ** 2))),
            rms_angle_deg=float(np.degrees(np.sqrt(np.mean(err_angle[seg] ** 2)))),
            latency_ticks=int(math.floor(lat + 0.5)),
            osc_pitch_lag=alignment_lag(osc_est, osc_true, half_cycle),
        ))
    return metrics, extras


def format_table(metrics) -> str:
    head = (f"{'method':<14} {'rms_roll':>9} {'rms_pitch':>10} {'rms_yaw':>9} "
            f"{'rms_angle':>10} {'latency':>8} {'osc_lag':>8}")
    lines = [head, "-" * len(head)]
    for m in metrics:
        lines.append(
            f"{m.method:<14} {m.rms_roll_deg:>9.3f} {m.rms_pitch_deg:>10.3f} "
            f"{m.rms_yaw_deg:>9.3f} {m.rms_angle_deg:>10.3f} "
            f"{m.latency_ticks:>8d} {m.osc_pitch_lag:>8d}")
    return "\n".join(lines)
