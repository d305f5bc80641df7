"""Streaming estimation pipeline: the full dataflow over one sample log.

Ingest order per grid tick: resample the fast channels onto the 200 Hz grid,
track the flapping frequency (sliding FFT + fusion), dead-reckon the phase,
subtract the learned per-axis patterns, condition, then drive the attitude
EKF and the internal-model EKF; cycle-wrap events trigger the correlation
phase correction and the k-means + GP refits.  Everything is synchronous and
deterministic: identical logs produce identical outputs.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import phase as phase_mod
from .attitude import AttitudeEkf, AttitudeNoise, GpsAccelEstimator
from .frequency import FrequencyTracker
from .internal import (
    AeroConfig,
    FlightCondition,
    InternalEkf,
    InternalNoise,
    cycle_avg_closed,
    estimate_oscillation_params,
    OscillationParams,
    reconstruct_state,
    wind_force,
    wind_to_body,
)
from .patterns import PeriodicPattern, fit, kmeans_fit_arrays, predict_mean
from .rotations import quat_to_matrix
from .signals import Biquad, Channel, TimedSample

TWO_PI = 2.0 * math.pi

LEARN_AXES = (
    (Channel.ACCEL, 0), (Channel.ACCEL, 1), (Channel.ACCEL, 2),
    (Channel.GYRO, 0), (Channel.GYRO, 1), (Channel.GYRO, 2),
)


@dataclass
class PipelineConfig:
    """Streaming defaults; rates and window sizes follow the flight setup."""

    f_s: float = 200.0
    fft_window: int = 512
    fft_hop: int = 32
    band_lo: float = 1.0
    band_hi: float = 8.0
    k_clusters: int = 16
    stack_cycles: int = 4
    n_harm: int = 5
    freq_smooth: float = 1.0
    k_cc: float = 0.1
    phase_bound: float = math.pi / 4.0
    postfilter_hz: float = 35.0
    gps_accel_cutoff: float = 1.0
    gps_rate: float = 8.7
    max_out_of_order: float = 0.05
    wind: tuple = (0.0, 0.0, 0.0)
    mag_inclination_deg: float = 50.0
    mag_declination_deg: float = 0.0
    use_gp_variance: bool = False
    aero: AeroConfig = field(default_factory=AeroConfig)
    attitude_noise: AttitudeNoise = field(default_factory=AttitudeNoise)
    internal_noise: InternalNoise = field(default_factory=InternalNoise)

    def __post_init__(self):
        if not 0.0 < self.band_lo < self.band_hi < 0.5 * self.f_s:
            raise ValueError("frequency band must sit below Nyquist")
        if self.stack_cycles * self.f_s / self.band_hi < self.k_clusters:
            raise ValueError("memory stack cannot hold k_clusters samples")

    def mag_ref(self):
        inc = math.radians(self.mag_inclination_deg)
        dec = math.radians(self.mag_declination_deg)
        return np.array([
            math.cos(inc) * math.cos(dec),
            math.cos(inc) * math.sin(dec),
            -math.sin(inc),
        ])


@dataclass(eq=False)
class PipelineOutput:
    """One synchronized estimator row per resampled grid tick."""

    t: float
    raw_accel: np.ndarray
    raw_gyro: np.ndarray
    free_accel: np.ndarray
    free_gyro: np.ndarray
    phi: float
    f_freq: float
    var_freq: float
    q_att: np.ndarray
    p_bar: np.ndarray
    v_bar: np.ndarray
    q_rec: np.ndarray
    v_rec: np.ndarray
    p_rec: np.ndarray
    pattern_id: int


@dataclass(eq=False)
class PipelineSnapshot:
    """Immutable summary of the estimator state."""

    t: float
    phi: float
    f_freq: float
    var_freq: float
    pattern_id: int
    patterns: dict
    attitude_q: np.ndarray
    gyro_bias: np.ndarray
    internal_p: np.ndarray
    internal_v: np.ndarray
    counters: dict


class _GridInterpolator:
    """Causal linear interpolation of one raw channel onto grid times."""

    def __init__(self):
        self.t0 = None
        self.v0 = None
        self.t1 = None
        self.v1 = None

    def push(self, t, v):
        self.t0, self.v0 = self.t1, self.v1
        self.t1, self.v1 = t, v

    @property
    def t_latest(self):
        return -math.inf if self.t1 is None else self.t1

    def covers(self, t):
        return self.t0 is not None and self.t0 <= t <= self.t1

    def at(self, t):
        if self.t1 == self.t0:
            return self.v1.copy()
        a = (t - self.t0) / (self.t1 - self.t0)
        return self.v0 + a * (self.v1 - self.v0)


class _Stack:
    """Bounded (phi, value, t) store trimmed to the current cycle capacity."""

    def __init__(self):
        self.phis = []
        self.values = []
        self.times = []

    def push(self, phi, value, t):
        self.phis.append(phi)
        self.values.append(value)
        self.times.append(t)

    def trim(self, capacity):
        if len(self.phis) > capacity:
            self.phis = self.phis[-capacity:]
            self.values = self.values[-capacity:]
            self.times = self.times[-capacity:]

    def detrended_values(self):
        """Values minus the least-squares linear trend in time.

        The slow trend otherwise aliases into a phase-correlated component
        of the cluster means and phase-leads the oscillation-free output.
        """
        y = np.asarray(self.values)
        t = np.asarray(self.times)
        tc = t - t.mean()
        denom = float(tc @ tc)
        if denom > 0.0:
            slope = float(tc @ (y - y.mean())) / denom
            return y - slope * tc
        return y.copy()

    def __len__(self):
        return len(self.phis)


class Pipeline:
    """Single-owner streaming estimator over one MARG + GPS log."""

    def __init__(self, config: PipelineConfig = None):
        self.config = config or PipelineConfig()
        cfg = self.config
        self.freq_tracker = FrequencyTracker(
            cfg.f_s, cfg.fft_window, cfg.fft_hop, cfg.band_lo, cfg.band_hi,
            cfg.freq_smooth)
        self.phase_state = phase_mod.PhaseState(
            k_cc=cfg.k_cc, phi_d_bounds=(-cfg.phase_bound, cfg.phase_bound))
        self.attitude = AttitudeEkf(cfg.attitude_noise, mag_ref=cfg.mag_ref())
        self.internal = InternalEkf(cfg.internal_noise)
        self.gps_accel = GpsAccelEstimator(cfg.gps_accel_cutoff, cfg.gps_rate)
        self.patterns = {key: PeriodicPattern.zero(cfg.n_harm) for key in LEARN_AXES}
        self.stacks = {key: _Stack() for key in LEARN_AXES}
        self.pattern_id = 0
        self.counters = {"dropped": 0, "late": 0, "gated_accel": 0,
                         "gated_gps": 0, "refits": 0, "phase_corrections": 0}
        self.spectrogram = []
        self._interp = {Channel.ACCEL: _GridInterpolator(),
                        Channel.GYRO: _GridInterpolator()}
        self._last_t = {}
        self._events = []
        self._event_seq = 0
        self._tick = None
        self._freq = None
        self._phi_prev = None
        self._have_phase = False
        self._f_trim = 0.0
        self._post = {key: Biquad(cfg.postfilter_hz, cfg.f_s) for key in LEARN_AXES}
        self._cc_phis = []
        self._cc_s = []
        self._gps_pos0 = None
        self._gps_vel0 = None
        self._last_mag = None
        self._t_latest_in = -math.inf

    # -- ingest ------------------------------------------------------------

    def ingest(self, sample: TimedSample):
        """Feed one sample; returns the list of grid outputs it released."""
        cfg = self.config
        ch = sample.channel
        t_prev = self._last_t.get(ch, -math.inf)
        if sample.t < t_prev:
            if t_prev - sample.t > cfg.max_out_of_order:
                self.counters["late"] += 1
            self.counters["dropped"] += 1
            return []
        self._last_t[ch] = sample.t
        self._t_latest_in = max(self._t_latest_in, sample.t)
        if ch in self._interp:
            self._interp[ch].push(sample.t, sample.value)
        else:
            prio = {Channel.MAG: 0, Channel.GPS_POS: 1, Channel.GPS_VEL: 2}[ch]
            heapq.heappush(self._events,
                           (sample.t, prio, self._event_seq, ch, sample.value))
            self._event_seq += 1
        return self._flush()

    def _flush(self):
        cfg = self.config
        acc = self._interp[Channel.ACCEL]
        gyr = self._interp[Channel.GYRO]
        out = []
        while True:
            if acc.t1 is None or gyr.t1 is None:
                break
            if self._tick is None:
                t_start = max(acc.t0 if acc.t0 is not None else acc.t1,
                              gyr.t0 if gyr.t0 is not None else gyr.t1)
                self._tick = int(math.ceil(t_start * cfg.f_s - 1e-9))
            t = self._tick / cfg.f_s
            if not (acc.t_latest >= t and gyr.t_latest >= t):
                break
            if not acc.covers(t) or not gyr.covers(t):
                if acc.t_latest >= t and gyr.t_latest >= t:
                    # grid tick fell before the usable coverage; skip it
                    self._tick += 1
                    continue
                break
            while self._events and self._events[0][0] <= t:
                t_ev, _, _, ch, value = heapq.heappop(self._events)
                self._handle_event(t_ev, ch, value)
            out.append(self._process_tick(t, acc.at(t), gyr.at(t)))
            self._tick += 1
        return out

    def _handle_event(self, t_ev, ch, value):
        if ch is Channel.MAG:
            self._last_mag = value
            if self.attitude._initialized:
                self.attitude.update_mag(value)
        elif ch is Channel.GPS_POS:
            if self.internal.initialized:
                if not self.internal.update_gps_pos(value):
                    self.counters["gated_gps"] += 1
            else:
                self._gps_pos0 = value
                self._maybe_init_internal()
        elif ch is Channel.GPS_VEL:
            self.gps_accel.push(t_ev, value)
            if self.internal.initialized:
                if not self.internal.update_gps_vel(value):
                    self.counters["gated_gps"] += 1
            else:
                self._gps_vel0 = value
                self._maybe_init_internal()

    def _maybe_init_internal(self):
        if self._gps_pos0 is not None and self._gps_vel0 is not None:
            self.internal.initialize(self._gps_pos0, self._gps_vel0)

    # -- per-tick work -------------------------------------------------------

    def _process_tick(self, t, a_raw, w_raw):
        cfg = self.config
        est = self.freq_tracker.push(t, float(a_raw[2]), float(w_raw[1]))
        if est is not None:
            self._freq = est
            if self.freq_tracker.last_spectra is not None:
                ts, spec_a, _ = self.freq_tracker.last_spectra
                if not self.spectrogram or self.spectrogram[-1][0] != ts:
                    self.spectrogram.append((ts, spec_a))

        wrapped = False
        if self._freq is not None:
            if not self._have_phase:
                self.phase_state = phase_mod.PhaseState(
                    phi=0.0, t_last=t, k_cc=cfg.k_cc,
                    phi_d_bounds=(-cfg.phase_bound, cfg.phase_bound))
                self._have_phase = True
            else:
                prev = self.phase_state.phi
                self.phase_state = phase_mod.advance(
                    self.phase_state, t, self._freq.f_freq + self._f_trim)
                wrapped = self.phase_state.phi < prev

        phi = self.phase_state.phi if self._have_phase else float("nan")

        osc = np.zeros(6)
        if self._have_phase:
            for i, key in enumerate(LEARN_AXES):
                pat = self.patterns[key]
                if not pat.is_zero:
                    osc[i] = predict_mean(pat, phi)
        raw6 = np.concatenate([a_raw, w_raw])
        free6 = np.empty(6)
        for i, key in enumerate(LEARN_AXES):
            free6[i] = self._post[key].step(raw6[i] - osc[i])
        a_free = free6[:3]
        w_free = free6[3:]

        if self._have_phase:
            for i, key in enumerate(LEARN_AXES):
                self.stacks[key].push(phi, raw6[i], t)
            pat_az = self.patterns[(Channel.ACCEL, 2)]
            pat_wy = self.patterns[(Channel.GYRO, 1)]
            self._cc_phis.append(phi)
            self._cc_s.append((raw6[2] - pat_az.removed_mean,
                               raw6[4] - pat_wy.removed_mean))

        if wrapped:
            self._on_cycle_wrap()

        # attitude EKF on conditioned oscillation-free signals
        if not self.attitude._initialized:
            self.attitude.initialize_from(a_raw, self._last_mag)
        self.attitude.predict(w_free, 1.0 / cfg.f_s)
        a_dyn, _ = self.gps_accel.current(t)
        if not self.attitude.update_accel(a_free, a_dyn):
            self.counters["gated_accel"] += 1

        # internal model prediction at the tick rate
        q_att = self.attitude.state.q
        f_hz = self._freq.f_freq if self._freq is not None else float("nan")
        var_f = self._freq.var_freq if self._freq is not None else float("nan")
        if self.internal.initialized:
            self._internal_predict(q_att, f_hz)
            p_bar = self.internal.state.p_bar.copy()
            v_bar = self.internal.state.v_bar.copy()
        else:
            p_bar = np.zeros(3)
            v_bar = np.zeros(3)

        accel_pats = [self.patterns[(Channel.ACCEL, i)] for i in range(3)]
        gyro_pats = [self.patterns[(Channel.GYRO, i)] for i in range(3)]
        if self._have_phase and self._freq is not None:
            p_rec, v_rec, q_rec = reconstruct_state(
                p_bar, v_bar, q_att, accel_pats, gyro_pats, phi, f_hz)
        else:
            p_rec, v_rec, q_rec = p_bar.copy(), v_bar.copy(), q_att.copy()

        return PipelineOutput(
            t=t, raw_accel=a_raw.copy(), raw_gyro=w_raw.copy(),
            free_accel=a_free.copy(), free_gyro=w_free.copy(), phi=phi,
            f_freq=f_hz, var_freq=var_f, q_att=q_att.copy(),
            p_bar=p_bar, v_bar=v_bar, q_rec=q_rec, v_rec=v_rec, p_rec=p_rec,
            pattern_id=self.pattern_id,
        )

    def _internal_predict(self, q_att, f_hz):
        cfg = self.config
        r_bi = quat_to_matrix(q_att)
        v_air = self.internal.state.v_bar - np.asarray(cfg.wind)
        v_b = float(np.linalg.norm(v_air))
        if v_b < 0.5 or not math.isfinite(f_hz):
            f_w = np.zeros(3)
            r_wb = np.eye(3)
        else:
            v_air_b = r_bi.T @ v_air
            alpha_bar = math.atan2(-v_air_b[2], v_air_b[0])
            cond = FlightCondition.from_config(cfg.aero, v_b, alpha_bar, f_hz)
            osc = estimate_oscillation_params(
                self.patterns[(Channel.ACCEL, 2)],
                self.patterns[(Channel.GYRO, 1)], cfg.aero, cond)
            if osc is None:
                osc = OscillationParams()
            coeffs = cycle_avg_closed(cfg.aero, cond, osc)
            f_w = wind_force(coeffs, cond.Q, cfg.aero.S)
            r_wb = wind_to_body(v_air_b)
        self.internal.predict(r_bi, r_wb, f_w, cfg.aero.m, 1.0 / cfg.f_s,
                              cfg.aero.g)

    # -- per-cycle work ------------------------------------------------------

    def _on_cycle_wrap(self):
        cfg = self.config
        if self._freq is None:
            return
        w_len = int(math.ceil(cfg.f_s / self._freq.f_freq))
        cap = cfg.stack_cycles * w_len

        pat_az = self.patterns[(Channel.ACCEL, 2)]
        pat_wy = self.patterns[(Channel.GYRO, 1)]
        if not pat_az.is_zero and not pat_wy.is_zero and len(self._cc_s) >= w_len:
            phis = self._cc_phis[-w_len:]
            s = np.asarray(self._cc_s[-w_len:])
            s_hat = np.empty_like(s)
            for i, p in enumerate(phis):
                s_hat[i, 0] = predict_mean(pat_az, p)
                s_hat[i, 1] = predict_mean(pat_wy, p)
            r_cc = phase_mod.cross_correlation(s, s_hat, w_len)
            corrected = phase_mod.correct(
                self.phase_state, r_cc, self._freq.f_freq, cfg.f_s)
            delta = float(phase_mod.wrap_signed(
                corrected.phi - self.phase_state.phi))
            self.phase_state = corrected
            # trim the dead-reckoning frequency so persistent drift (which
            # rectifies against the pattern slope within each cycle) dies out
            self._f_trim += 0.5 * delta * self._freq.f_freq / TWO_PI
            self._f_trim = min(0.5, max(-0.5, self._f_trim))
            self.counters["phase_corrections"] += 1
        keep = 2 * w_len
        if len(self._cc_s) > keep:
            self._cc_phis = self._cc_phis[-keep:]
            self._cc_s = self._cc_s[-keep:]

        refitted = False
        for key in LEARN_AXES:
            stack = self.stacks[key]
            stack.trim(cap)
            if len(stack) >= cap and cap >= cfg.k_clusters:
                clusters = kmeans_fit_arrays(
                    np.asarray(stack.phis), stack.detrended_values(),
                    cfg.k_clusters)
                self.patterns[key] = fit(clusters, cfg.n_harm)
                refitted = True
        if refitted:
            self.pattern_id += 1
            self.counters["refits"] += 1

    # -- snapshot ------------------------------------------------------------

    def snapshot(self) -> PipelineSnapshot:
        """Immutable copy of the estimator state (equal if nothing ingested)."""
        return PipelineSnapshot(
            t=self.phase_state.t_last if self._have_phase else float("nan"),
            phi=self.phase_state.phi if self._have_phase else float("nan"),
            f_freq=self._freq.f_freq if self._freq else float("nan"),
            var_freq=self._freq.var_freq if self._freq else float("nan"),
            pattern_id=self.pattern_id,
            patterns=dict(self.patterns),
            attitude_q=self.attitude.state.q.copy(),
            gyro_bias=self.attitude.state.b_g.copy(),
            internal_p=self.internal.state.p_bar.copy(),
            internal_v=self.internal.state.v_bar.copy(),
            counters=dict(self.counters),
        )


def run_pipeline(samples, config: PipelineConfig = None):
    """Convenience batch driver: ingest a whole log, return all outputs."""
    pipe = Pipeline(config)
    outputs = []
    for s in samples:
        outputs.extend(pipe.ingest(s))
    return pipe, outputs
