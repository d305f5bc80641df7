"""Synthetic longitudinal flapping-flight generator with MARG + GPS sensors.

Integrates the longitudinal Newton-Euler equations with the oscillatory
quasi-steady coefficient models (RK4), emits noisy accel / gyro / mag / GPS
streams at their configured rates with timestamp jitter, and keeps the full
ground truth for acceptance testing.  Deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .internal import AeroConfig, FlightCondition, theodorsen
from .rotations import quat_from_euler
from .signals import Channel, TimedSample, centered_cycle_average

TWO_PI = 2.0 * math.pi


class DivergenceError(RuntimeError):
    """Raised when the integrated state blows up."""


@dataclass
class GustEvent:
    """Wind gust: inertial wind vector applied with a smooth envelope.

    The lateral (Y) wind component additionally drives a kinematic roll-rate
    disturbance that integrates back to zero after the event.
    """

    t_start: float
    duration: float
    vector: tuple = (0.0, 0.0, 0.0)


@dataclass
class SimConfig:
    """Simulator configuration; rates and vehicle scale follow the test craft."""

    aero: AeroConfig = field(default_factory=AeroConfig)
    f_flap: float = 5.0
    V_target: float = 8.0
    C_L_osc: float = 0.35
    phi_L: float = 0.4
    rate_imu: float = 170.8
    rate_mag: float = 13.4
    rate_gps: float = 8.7
    noise_accel: float = 0.15
    noise_gyro: float = 0.01
    noise_mag: float = 0.01
    noise_gps_pos: float = 0.3
    noise_gps_vel: float = 0.05
    bias_accel: tuple = (0.05, -0.03, 0.04)
    bias_gyro: tuple = (0.002, -0.001, 0.0015)
    timestamp_jitter: float = 0.0005
    mag_inclination_deg: float = 50.0
    mag_declination_deg: float = 0.0
    wind: tuple = (0.0, 0.0, 0.0)
    gusts: tuple = ()
    gyro_x_disturb: float = 0.02
    gyro_x_corr_time: float = 0.3
    roll_gust_gain: float = 0.25
    tail_lift_slope: float = 1.5
    tail_drag0: float = 0.01
    pitch_hold_gain: float = 1.0
    maneuver_amp: float = 0.04
    maneuver_hz: float = 0.15
    integrator_rate: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        for name in ("rate_imu", "rate_mag", "rate_gps", "integrator_rate", "f_flap"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("noise_accel", "noise_gyro", "noise_mag",
                     "noise_gps_pos", "noise_gps_vel"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")

    def mag_ref(self):
        inc = math.radians(self.mag_inclination_deg)
        dec = math.radians(self.mag_declination_deg)
        return np.array([
            math.cos(inc) * math.cos(dec),
            math.cos(inc) * math.sin(dec),
            -math.sin(inc),
        ])


@dataclass(eq=False)
class TruthRecord:
    """Ground truth at one integrator step."""

    t: float
    u: float
    w: float
    theta: float
    q: float
    phi: float
    roll: float
    pos: np.ndarray
    vel: np.ndarray
    C_L: float
    C_T: float
    C_D: float
    specific_force: np.ndarray
    omega: np.ndarray
    osc_accel: np.ndarray = None
    osc_gyro: np.ndarray = None


@dataclass(eq=False)
class TruthLog:
    """Array-backed truth stream (one row per integrator step)."""

    t: np.ndarray
    u: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    phi: np.ndarray
    roll: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    coeffs: np.ndarray          # columns C_L, C_T, C_D
    specific_force: np.ndarray
    omega: np.ndarray
    osc_accel: np.ndarray
    osc_gyro: np.ndarray

    def __len__(self):
        return len(self.t)

    def record(self, i: int) -> TruthRecord:
        return TruthRecord(
            t=float(self.t[i]), u=float(self.u[i]), w=float(self.w[i]),
            theta=float(self.theta[i]), q=float(self.q[i]), phi=float(self.phi[i]),
            roll=float(self.roll[i]), pos=self.pos[i].copy(), vel=self.vel[i].copy(),
            C_L=float(self.coeffs[i, 0]), C_T=float(self.coeffs[i, 1]),
            C_D=float(self.coeffs[i, 2]), specific_force=self.specific_force[i].copy(),
            omega=self.omega[i].copy(), osc_accel=self.osc_accel[i].copy(),
            osc_gyro=self.osc_gyro[i].copy(),
        )

    def quaternion(self, i: int):
        return quat_from_euler(float(self.roll[i]), float(self.theta[i]), 0.0)


def rotation_body_to_inertial(theta: float, roll: float = 0.0):
    """R_B^I for pitch ``theta`` about inertial Y then roll about body X."""
    ct, st = math.cos(theta), math.sin(theta)
    cr, sr = math.cos(roll), math.sin(roll)
    ry = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return ry @ rx


class FwavSimulator:
    """RK4 integrator of the longitudinal dynamics with flapping coefficients.

    State vector: [u, w, theta, q, px, py, pz, vx, vy, vz, roll].  The body
    longitudinal states follow the printed dynamics; inertial kinematics are
    integrated alongside and agree exactly in the gust-free case.
    """

    def __init__(self, config: SimConfig = None):
        self.config = config or SimConfig()
        self.trim = self.solve_trim()

    # -- aerodynamics ------------------------------------------------------

    def _tail_coeffs(self, alpha: float, q: float, v_b: float, delta_t: float,
                     theta_err: float = 0.0):
        # theta_err drives the trim-hold deflection standing in for the
        # onboard attitude stabilization of the real platform
        cfg = self.config
        delta = delta_t + cfg.pitch_hold_gain * theta_err
        alpha_t = alpha + delta - q * cfg.aero.l_t / max(v_b, 1e-6)
        c_lt = cfg.tail_lift_slope * alpha_t
        c_dt = cfg.tail_drag0 + c_lt * c_lt / cfg.aero.A
        return c_lt, c_dt

    def _wing_coeffs(self, alpha: float, v_b: float, phi: float):
        aero = self.config.aero
        k_red = TWO_PI * self.config.f_flap * aero.chord_scale / max(v_b, 1e-6)
        f1, g1 = theodorsen(k_red)
        s, c = math.sin(phi), math.cos(phi)
        c_l = aero.C_L_alpha * alpha + self.config.C_L_osc * math.sin(phi + self.config.phi_L)
        c_t = aero.C_Th * (k_red * aero.h0) ** 2 * s * (g1 * s - f1 * c) + alpha * c_l
        c_d = aero.C_D0 + c_l * c_l / aero.A
        return c_l, c_t, c_d

    def _gust_wind(self, t: float):
        wind = np.asarray(self.config.wind, dtype=np.float64).copy()
        p_gust = 0.0
        for ev in self.config.gusts:
            if ev.t_start <= t <= ev.t_start + ev.duration:
                x = (t - ev.t_start) / ev.duration
                env = math.sin(math.pi * x) ** 2
                vec = np.asarray(ev.vector, dtype=np.float64)
                wind += env * vec
                # lateral wind kicks a roll rate that integrates back to zero
                p_gust += self.config.roll_gust_gain * vec[1] * math.sin(TWO_PI * x)
        return wind, p_gust

    def _derivs(self, state, t: float, oscillating: bool = True):
        cfg = self.config
        aero = cfg.aero
        u, w, theta, q = state[0], state[1], state[2], state[3]
        vel = state[7:10]
        roll = state[10]
        if abs(u) > 100.0 or not math.isfinite(u) or not math.isfinite(w):
            raise DivergenceError(f"state blow-up at t={t:.3f}: u={u}")
        wind, p_gust = self._gust_wind(t)
        r_bi = rotation_body_to_inertial(theta, roll)
        wind_b = r_bi.T @ wind
        u_a = u - wind_b[0]
        w_a = w - wind_b[2]
        v_b = math.hypot(u_a, w_a)
        alpha = math.atan2(-w_a, u_a)
        phi = TWO_PI * cfg.f_flap * t if oscillating else 0.0
        if oscillating:
            c_l, c_t, c_d = self._wing_coeffs(alpha, v_b, phi)
        else:
            c_l = aero.C_L_alpha * alpha
            _, c_t, c_d = self._wing_coeffs_mean(alpha, v_b)
        # slow commanded pitch offsets exercise the slow-varying dynamics;
        # multiple non-harmonic tones keep the slow band broadband enough
        # for latency (group-delay) measurements downstream
        f_m = cfg.maneuver_hz
        theta_cmd = cfg.maneuver_amp * (
            math.sin(TWO_PI * f_m * t)
            + 0.6 * math.sin(TWO_PI * 2.3 * f_m * t + 1.0)
            + 0.4 * math.sin(TWO_PI * 3.7 * f_m * t + 2.0))
        c_lt, c_dt = self._tail_coeffs(alpha, q, v_b, self.trim["delta_t"],
                                       theta - self.trim["theta"] - theta_cmd)
        q_dyn = 0.5 * aero.rho * v_b * v_b
        lift = q_dyn * aero.S * c_l
        lift_t = q_dyn * aero.S * c_lt
        thrust = q_dyn * aero.S * c_t
        drag = q_dyn * aero.S * c_d
        drag_t = q_dyn * aero.S * c_dt
        sa, ca = math.sin(alpha), math.cos(alpha)
        f_x = ((lift + lift_t) * sa + (thrust - drag - drag_t) * ca) / aero.m
        f_z = ((lift + lift_t) * ca - (thrust - drag - drag_t) * sa) / aero.m
        du = f_x + aero.g * math.sin(theta) - q * w
        dw = f_z - aero.g * math.cos(theta) + q * u
        dq = (lift * aero.l_w + lift_t * aero.l_t) * ca / aero.I_p
        spec_force = np.array([f_x, 0.0, f_z])
        acc_inertial = r_bi @ spec_force - np.array([0.0, 0.0, aero.g])
        return (
            np.concatenate([[du, dw, q, dq], vel, acc_inertial, [p_gust]]),
            (c_l, c_t, c_d),
            spec_force,
        )

    def _wing_coeffs_mean(self, alpha: float, v_b: float):
        aero = self.config.aero
        k_red = TWO_PI * self.config.f_flap * aero.chord_scale / max(v_b, 1e-6)
        f1, g1 = theodorsen(k_red)
        c_l = aero.C_L_alpha * alpha
        c_t = 0.5 * aero.C_Th * (k_red * aero.h0) ** 2 * g1 + alpha * c_l
        c_d = aero.C_D0 + c_l * c_l / aero.A
        return c_l, c_t, c_d

    # -- trim --------------------------------------------------------------

    def solve_trim(self):
        """Cycle-mean equilibrium (alpha, theta, tail setting) at V_target."""
        cfg = self.config
        aero = cfg.aero
        v = cfg.V_target
        q_dyn = 0.5 * aero.rho * v * v
        k_red = TWO_PI * cfg.f_flap * aero.chord_scale / v
        _, g1 = theodorsen(k_red)
        cond = FlightCondition.from_config(aero, v, 0.0, cfg.f_flap)
        omega = TWO_PI * cfg.f_flap
        q_osc = abs(cfg.C_L_osc * q_dyn * aero.S * aero.l_w / (aero.I_p * omega))

        def residual(x):
            alpha, theta, delta_t = x
            c_l = aero.C_L_alpha * alpha
            c_t = (0.5 * aero.C_Th * (k_red * aero.h0) ** 2 * g1
                   + alpha * alpha * aero.C_L_alpha
                   + cfg.C_L_osc * q_osc / (2.0 * omega))
            c_d = aero.C_D0 + (c_l * c_l + 0.5 * cfg.C_L_osc ** 2) / aero.A
            c_lt = cfg.tail_lift_slope * (alpha + delta_t)
            c_dt = cfg.tail_drag0 + c_lt * c_lt / aero.A
            sa, ca = math.sin(alpha), math.cos(alpha)
            fx = q_dyn * aero.S * ((c_l + c_lt) * sa + (c_t - c_d - c_dt) * ca) / aero.m
            fz = q_dyn * aero.S * ((c_l + c_lt) * ca - (c_t - c_d - c_dt) * sa) / aero.m
            mq = q_dyn * aero.S * (c_l * aero.l_w + c_lt * aero.l_t) * ca / aero.I_p
            return [
                fx + aero.g * math.sin(theta),
                fz - aero.g * math.cos(theta),
                mq,
            ]

        sol = optimize.root(residual, x0=[0.12, 0.0, 0.0], tol=1e-12)
        if not sol.success:
            raise RuntimeError(f"trim solve failed: {sol.message}")
        alpha, theta, delta_t = sol.x
        return {
            "alpha": float(alpha),
            "theta": float(theta),
            "delta_t": float(delta_t),
            "u": v * math.cos(alpha),
            "w": -v * math.sin(alpha),
            "cond": FlightCondition.from_config(aero, v, float(alpha), cfg.f_flap),
        }

    def initial_state(self):
        tr = self.trim
        r_bi = rotation_body_to_inertial(tr["theta"])
        vel = r_bi @ np.array([tr["u"], 0.0, tr["w"]])
        return np.array([
            tr["u"], tr["w"], tr["theta"], 0.0,
            0.0, 0.0, 50.0,
            vel[0], vel[1], vel[2],
            0.0,
        ])

    # -- integration -------------------------------------------------------

    def step(self, state, t: float, dt: float, oscillating: bool = True):
        """One RK4 step; requires at least 50 steps per flapping cycle."""
        if dt > 1.0 / (50.0 * self.config.f_flap) + 1e-12:
            raise ValueError("dt too large: need >= 50 steps per flap cycle")
        k1, coeffs, spec = self._derivs(state, t, oscillating)
        k2, _, _ = self._derivs(state + 0.5 * dt * k1, t + 0.5 * dt, oscillating)
        k3, _, _ = self._derivs(state + 0.5 * dt * k2, t + 0.5 * dt, oscillating)
        k4, _, _ = self._derivs(state + dt * k3, t + dt, oscillating)
        new = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return new, coeffs, spec

    def run_truth(self, duration: float, oscillating: bool = True) -> TruthLog:
        """Integrate and collect ground truth at the integrator rate."""
        if duration <= 0.0:
            raise ValueError("duration must be positive")
        cfg = self.config
        dt = 1.0 / cfg.integrator_rate
        n = int(round(duration * cfg.integrator_rate)) + 1
        state = self.initial_state()
        t_arr = np.zeros(n)
        u_arr = np.zeros(n)
        w_arr = np.zeros(n)
        th_arr = np.zeros(n)
        q_arr = np.zeros(n)
        phi_arr = np.zeros(n)
        roll_arr = np.zeros(n)
        pos = np.zeros((n, 3))
        vel = np.zeros((n, 3))
        coeffs = np.zeros((n, 3))
        spec = np.zeros((n, 3))
        omega = np.zeros((n, 3))
        for i in range(n):
            t = i * dt
            _, c_i, f_i = self._derivs(state, t, oscillating)
            _, p_gust = self._gust_wind(t)
            t_arr[i] = t
            u_arr[i], w_arr[i], th_arr[i], q_arr[i] = state[0], state[1], state[2], state[3]
            phi_arr[i] = (TWO_PI * cfg.f_flap * t) % TWO_PI if oscillating else 0.0
            roll_arr[i] = state[10]
            pos[i] = state[4:7]
            vel[i] = state[7:10]
            coeffs[i] = c_i
            spec[i] = f_i
            qr = state[3]
            rl = state[10]
            omega[i] = [p_gust, qr * math.cos(rl), -qr * math.sin(rl)]
            if i + 1 < n:
                state, _, _ = self.step(state, t, dt, oscillating)
        period = 1.0 / cfg.f_flap
        osc_accel = spec - centered_cycle_average(spec, period, cfg.integrator_rate)
        osc_gyro = omega - centered_cycle_average(omega, period, cfg.integrator_rate)
        return TruthLog(
            t=t_arr, u=u_arr, w=w_arr, theta=th_arr, q=q_arr, phi=phi_arr,
            roll=roll_arr, pos=pos, vel=vel, coeffs=coeffs,
            specific_force=spec, omega=omega, osc_accel=osc_accel, osc_gyro=osc_gyro,
        )

    # -- sensor sampling ----------------------------------------------------

    def sample_imu(self, record: TruthRecord, rng: np.random.Generator = None):
        """Accel and gyro samples for one truth record (noise optional)."""
        cfg = self.config
        accel = record.specific_force.copy()
        gyro = record.omega.copy()
        if rng is not None:
            accel += np.asarray(cfg.bias_accel) + cfg.noise_accel * rng.standard_normal(3)
            gyro += np.asarray(cfg.bias_gyro) + cfg.noise_gyro * rng.standard_normal(3)
        return (
            TimedSample(record.t, Channel.ACCEL, accel),
            TimedSample(record.t, Channel.GYRO, gyro),
        )

    def _jittered_times(self, duration: float, rate: float, rng):
        n = int(math.floor(duration * rate + 1e-9)) + 1
        base = np.arange(n) / rate
        jitter = self.config.timestamp_jitter
        if jitter > 0.0:
            base = base + rng.uniform(-jitter, jitter, size=n)
            base[0] = max(base[0], 0.0)
            base = np.maximum.accumulate(base)
        return np.clip(base, 0.0, duration)

    def run(self, duration: float, oscillating: bool = True):
        """Full simulation: returns (samples sorted by time, truth log)."""
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        truth = self.run_truth(duration, oscillating)
        t_grid = truth.t
        samples = []

        t_imu = self._jittered_times(duration, cfg.rate_imu, rng)
        spec = np.stack([np.interp(t_imu, t_grid, truth.specific_force[:, i])
                         for i in range(3)], axis=1)
        omega = np.stack([np.interp(t_imu, t_grid, truth.omega[:, i])
                          for i in range(3)], axis=1)
        spec += np.asarray(cfg.bias_accel) + cfg.noise_accel * rng.standard_normal(spec.shape)
        omega += np.asarray(cfg.bias_gyro) + cfg.noise_gyro * rng.standard_normal(omega.shape)
        # colored lateral-axis disturbance (airframe vibration, not motion)
        if cfg.gyro_x_disturb > 0.0:
            rho = math.exp(-1.0 / (cfg.rate_imu * cfg.gyro_x_corr_time))
            ar = np.zeros(len(t_imu))
            drive = cfg.gyro_x_disturb * math.sqrt(1.0 - rho * rho)
            noise = rng.standard_normal(len(t_imu))
            acc = 0.0
            for i in range(len(t_imu)):
                acc = rho * acc + drive * noise[i]
                ar[i] = acc
            omega[:, 0] += ar
        for i, t in enumerate(t_imu):
            samples.append(TimedSample(float(t), Channel.ACCEL, spec[i]))
            samples.append(TimedSample(float(t), Channel.GYRO, omega[i]))

        t_mag = self._jittered_times(duration, cfg.rate_mag, rng)
        m_ref = cfg.mag_ref()
        theta_m = np.interp(t_mag, t_grid, truth.theta)
        roll_m = np.interp(t_mag, t_grid, truth.roll)
        for i, t in enumerate(t_mag):
            r_bi = rotation_body_to_inertial(float(theta_m[i]), float(roll_m[i]))
            m_body = r_bi.T @ m_ref + cfg.noise_mag * rng.standard_normal(3)
            samples.append(TimedSample(float(t), Channel.MAG, m_body))

        t_gps = self._jittered_times(duration, cfg.rate_gps, rng)
        pos_g = np.stack([np.interp(t_gps, t_grid, truth.pos[:, i]) for i in range(3)], axis=1)
        vel_g = np.stack([np.interp(t_gps, t_grid, truth.vel[:, i]) for i in range(3)], axis=1)
        pos_g += cfg.noise_gps_pos * rng.standard_normal(pos_g.shape)
        vel_g += cfg.noise_gps_vel * rng.standard_normal(vel_g.shape)
        for i, t in enumerate(t_gps):
            samples.append(TimedSample(float(t), Channel.GPS_POS, pos_g[i]))
            samples.append(TimedSample(float(t), Channel.GPS_VEL, vel_g[i]))

        samples.sort(key=lambda s: (s.t, s.channel.value))
        return samples, truth
