"""Cycle-averaged longitudinal aerodynamics and the translational internal model.

Quasi-steady coefficient models (lift / thrust / drag with flapping-phase
oscillation terms), their closed-form cycle averages, a brute-force
quadrature oracle over the oscillation ODEs, the slow-varying position /
velocity EKF driven by the averaged wind-frame force, and reconstruction of
the oscillatory state from learned patterns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .patterns import PeriodicPattern
from .rotations import quat_from_rotvec, quat_mult, quat_to_matrix

TWO_PI = 2.0 * math.pi
E3 = np.array([0.0, 0.0, 1.0])


@dataclass
class AeroConfig:
    """Physical constants of the longitudinal model.

    Moment arms carry sign (positive ahead of the CoM) so the pitch moment
    can trim.  ``C_Th`` scales the Theodorsen thrust term and is vehicle
    specific.  ``chord_scale`` multiplies the reduced frequency 2 pi f / V;
    the default 1.0 keeps the bare definition.
    """

    m: float = 1.1
    I_p: float = 0.05
    l_w: float = 0.05
    l_t: float = -0.45
    S: float = 0.425
    C_L_alpha: float = 5.0
    C_D0: float = 0.05
    A: float = 17.0
    C_Th: float = 0.8
    h0: float = 0.35
    rho: float = 1.225
    g: float = 9.81
    chord_scale: float = 1.0

    def __post_init__(self):
        for name in ("m", "I_p", "S", "A", "rho"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class FlightCondition:
    """Slow-varying flight point: airspeed, mean AoA, flapping frequency."""

    V_b: float
    alpha_bar: float
    f: float
    Q: float
    k_red: float

    @classmethod
    def from_config(cls, config: AeroConfig, V_b: float, alpha_bar: float, f: float):
        if V_b <= 0.0:
            raise ValueError("airspeed must be positive")
        return cls(
            V_b=V_b,
            alpha_bar=alpha_bar,
            f=f,
            Q=0.5 * config.rho * V_b * V_b,
            k_red=TWO_PI * f * config.chord_scale / V_b,
        )


@dataclass(frozen=True)
class OscillationParams:
    """Online-estimated oscillation amplitudes and phases."""

    C_L_osc: float = 0.0
    phi_L: float = 0.0
    alpha_osc: float = 0.0
    phi_alpha: float = 0.0
    q_osc: float = 0.0
    phi_d: float = 0.0


@dataclass(eq=False)
class InternalState:
    """Slow-varying position / velocity belief with covariance."""

    p_bar: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_bar: np.ndarray = field(default_factory=lambda: np.zeros(3))
    P: np.ndarray = field(default_factory=lambda: np.eye(6) * 100.0)

    def copy(self) -> "InternalState":
        return InternalState(self.p_bar.copy(), self.v_bar.copy(), self.P.copy())


def theodorsen(k_red: float):
    """Real/imaginary parts (F1, G1) of the two-pole Theodorsen approximation."""
    if k_red <= 0.0:
        raise ValueError("reduced frequency must be positive")
    c = 1.0 - 0.165 / (1.0 - 0.0455j / k_red) - 0.335 / (1.0 - 0.3j / k_red)
    return c.real, c.imag


def lift_coeff(config: AeroConfig, cond: FlightCondition, osc: OscillationParams,
               phi: float):
    """C_L = C_L_alpha * alpha_bar + C_L_osc * sin(phi + phi_L)."""
    return config.C_L_alpha * cond.alpha_bar + osc.C_L_osc * np.sin(phi + osc.phi_L)


def thrust_coeff(config: AeroConfig, cond: FlightCondition, osc: OscillationParams,
                 phi: float, alpha_osc_series=None):
    """Thrust coefficient with the Theodorsen flapping term.

    ``alpha_osc_series`` overrides the sinusoidal AoA oscillation (used by the
    quadrature oracle, which integrates the AoA dynamics itself).
    """
    f1, g1 = theodorsen(cond.k_red)
    s, c = np.sin(phi), np.cos(phi)
    flap = config.C_Th * (cond.k_red * config.h0) ** 2 * s * (g1 * s - f1 * c)
    if alpha_osc_series is None:
        alpha_tilde = osc.alpha_osc * np.sin(phi + osc.phi_alpha)
    else:
        alpha_tilde = alpha_osc_series
    return flap + (cond.alpha_bar + alpha_tilde) * lift_coeff(config, cond, osc, phi)


def drag_coeff(config: AeroConfig, c_lift):
    """C_D = C_D0 + C_L^2 / A."""
    return config.C_D0 + np.square(c_lift) / config.A


def phase_lag(config: AeroConfig, cond: FlightCondition, osc: OscillationParams):
    """Phase difference between the AoA and lift oscillations, in [0, pi/2].

    Returns (phi_d, defined); both amplitudes zero yields (0.0, False).
    """
    b = osc.C_L_osc * cond.Q * config.S / (config.m * cond.V_b)
    denom = math.hypot(osc.q_osc, b)
    if denom == 0.0:
        return 0.0, False
    return math.acos(min(1.0, osc.q_osc / denom)), True


def consistent_oscillation(config: AeroConfig, cond: FlightCondition,
                           C_L_osc: float, phi_L: float) -> OscillationParams:
    """Oscillation parameters implied by the lift-driven oscillation dynamics.

    Steady-state amplitudes/phases of the pitch-rate and AoA oscillations for
    a given lift oscillation, used to build self-consistent test points and
    to complete online estimates.
    """
    omega = TWO_PI * cond.f
    a_w = C_L_osc * cond.Q * config.S * config.l_w / (config.I_p * omega)
    b = C_L_osc * cond.Q * config.S / (config.m * cond.V_b)
    alpha_osc = math.hypot(a_w, b) / omega
    params = OscillationParams(
        C_L_osc=C_L_osc,
        phi_L=phi_L,
        alpha_osc=alpha_osc,
        phi_alpha=phi_L + math.atan2(b, a_w),
        q_osc=abs(a_w),
    )
    phi_d, _ = phase_lag(config, cond, params)
    return OscillationParams(
        C_L_osc=params.C_L_osc, phi_L=params.phi_L, alpha_osc=params.alpha_osc,
        phi_alpha=params.phi_alpha, q_osc=params.q_osc, phi_d=phi_d,
    )


def cycle_avg_closed(config: AeroConfig, cond: FlightCondition,
                     osc: OscillationParams):
    """Closed-form cycle-averaged (C_L, C_T, C_D), small-oscillation regime."""
    _, g1 = theodorsen(cond.k_red)
    a = cond.alpha_bar
    cl = config.C_L_alpha * a
    ct = (0.5 * config.C_Th * (cond.k_red * config.h0) ** 2 * g1
          + a * a * config.C_L_alpha
          + osc.C_L_osc * osc.q_osc / (2.0 * TWO_PI * cond.f))
    cd = config.C_D0 + (config.C_L_alpha ** 2 * a * a
                        + 0.5 * osc.C_L_osc ** 2) / config.A
    return cl, ct, cd


def oscillation_series(config: AeroConfig, cond: FlightCondition,
                       osc: OscillationParams, npoints: int = 512):
    """Steady-periodic oscillation time series over one cycle, by quadrature.

    Integrates the lift-driven oscillation ODEs (pitch rate, pitch angle,
    AoA) with cumulative trapezoids on a uniform phase grid, picking the
    zero-mean periodic solution.  Returns a dict of arrays keyed
    phi / q_tilde / theta_tilde / alpha_tilde / theta_v.
    """
    phi = np.arange(npoints) * (TWO_PI / npoints)
    omega = TWO_PI * cond.f
    forcing = osc.C_L_osc * np.sin(phi + osc.phi_L)
    qs_over_ip = cond.Q * config.S * config.l_w / config.I_p

    def periodic_integral(dy_dt):
        # d/dt = omega d/dphi on the phase grid; wrap-aware trapezoid
        ext = np.append(dy_dt, dy_dt[0])
        y = cumulative_trapezoid(ext, dx=TWO_PI / npoints, initial=0.0)[:-1] / omega
        return y - np.mean(y)

    q_tilde = periodic_integral(forcing * qs_over_ip)
    theta_tilde = periodic_integral(q_tilde)
    alpha_tilde = periodic_integral(
        -forcing * cond.Q * config.S / (config.m * cond.V_b) - q_tilde)
    if not (np.all(np.isfinite(q_tilde)) and np.all(np.isfinite(alpha_tilde))):
        raise FloatingPointError("oscillation integration diverged")
    return {
        "phi": phi,
        "q_tilde": q_tilde,
        "theta_tilde": theta_tilde,
        "alpha_tilde": alpha_tilde,
        "theta_v": alpha_tilde + theta_tilde,
    }


def cycle_avg_numeric(config: AeroConfig, cond: FlightCondition,
                      osc: OscillationParams, npoints: int = 512):
    """Brute-force cycle averages: quadrature of the projected coefficients.

    Integrates the oscillation ODEs for the velocity-direction oscillation,
    then averages the projections of the instantaneous coefficients over one
    cycle on a >= 256-point grid.  Serves as the oracle for
    ``cycle_avg_closed``.
    """
    if npoints < 256:
        raise ValueError("quadrature needs at least 256 points")
    series = oscillation_series(config, cond, osc, npoints)
    phi = series["phi"]
    theta_v = series["theta_v"]
    c_l = lift_coeff(config, cond, osc, phi)
    c_t = thrust_coeff(config, cond, osc, phi, alpha_osc_series=series["alpha_tilde"])
    c_d = drag_coeff(config, c_l)
    cos_tv, sin_tv = np.cos(theta_v), np.sin(theta_v)
    # uniform-grid mean equals the periodic trapezoid rule
    cl_bar = float(np.mean(c_l * cos_tv - (c_t - c_d) * sin_tv))
    ct_bar = float(np.mean(c_t * cos_tv + c_l * sin_tv))
    cd_bar = float(np.mean(c_d * cos_tv))
    return cl_bar, ct_bar, cd_bar


def wind_force(coeffs, Q: float, S: float):
    """Wind-frame aerodynamic force Q S [C_T - C_D, 0, C_L] (lateral force nil)."""
    cl_bar, ct_bar, cd_bar = coeffs
    return Q * S * np.array([ct_bar - cd_bar, 0.0, cl_bar])


def wind_to_body(airspeed_body):
    """Wind->body rotation from the airspeed direction, zero sideslip.

    The wind X axis is the unit airspeed in body axes; the wind Y axis stays
    aligned with body Y (no lateral slip); Z completes the right-handed
    triad (positive lift points body-up).
    """
    x_w = np.asarray(airspeed_body, dtype=np.float64)
    n = np.linalg.norm(x_w)
    if n < 1e-9:
        return np.eye(3)
    x_w = x_w / n
    y_b = np.array([0.0, 1.0, 0.0])
    y_w = y_b - (y_b @ x_w) * x_w
    y_w /= np.linalg.norm(y_w)
    z_w = np.cross(x_w, y_w)
    return np.stack([x_w, y_w, z_w], axis=1)


@dataclass
class InternalNoise:
    """Internal-EKF tuning (artifact defaults, not paper values)."""

    accel_proc: float = 0.8       # m/s^2/sqrt(Hz) model error on v_bar
    pos_proc: float = 0.0         # extra position random walk
    gps_pos_noise: float = 0.3    # m
    gps_vel_noise: float = 0.05   # m/s
    gate_sigma: float = 5.0


class InternalEkf:
    """Linear Kalman filter on (position, velocity) with aero-model prediction."""

    def __init__(self, noise: InternalNoise = None):
        self.noise = noise or InternalNoise()
        self.state = InternalState()
        self.gate_count = 0
        self.initialized = False

    def initialize(self, pos, vel) -> None:
        self.state.p_bar = np.asarray(pos, dtype=np.float64).copy()
        self.state.v_bar = np.asarray(vel, dtype=np.float64).copy()
        p = np.zeros((6, 6))
        p[:3, :3] = np.eye(3) * self.noise.gps_pos_noise ** 2 * 4.0
        p[3:, 3:] = np.eye(3) * self.noise.gps_vel_noise ** 2 * 4.0
        self.state.P = p
        self.initialized = True

    def predict(self, r_bi, r_wb, f_wind, m: float, dt: float, g: float = 9.81) -> None:
        """Semi-implicit Euler step of the translational internal model.

        dv = (-g e3 + R_B^I R_W^B f^W / m) dt; dp = v dt with the updated v.
        """
        if not 0.0 < dt <= 0.1:
            raise ValueError(f"dt out of range (0, 0.1]: {dt}")
        st = self.state
        accel = -g * E3 + (r_bi @ (r_wb @ np.asarray(f_wind))) / m
        st.v_bar = st.v_bar + accel * dt
        st.p_bar = st.p_bar + st.v_bar * dt
        f = np.eye(6)
        f[:3, 3:] = np.eye(3) * dt
        q = np.zeros((6, 6))
        q[3:, 3:] = np.eye(3) * (self.noise.accel_proc ** 2) * dt
        q[:3, :3] = np.eye(3) * (self.noise.pos_proc ** 2 * dt + 1e-12)
        st.P = f @ st.P @ f.T + q
        st.P = 0.5 * (st.P + st.P.T)

    def _update(self, idx0: int, z, r_scalar: float) -> bool:
        st = self.state
        h = np.zeros((3, 6))
        h[:, idx0:idx0 + 3] = np.eye(3)
        pred = st.p_bar if idx0 == 0 else st.v_bar
        innov = np.asarray(z, dtype=np.float64) - pred
        s = h @ st.P @ h.T + r_scalar ** 2 * np.eye(3)
        d2 = float(innov @ np.linalg.solve(s, innov))
        if d2 > (self.noise.gate_sigma ** 2) * 3.0:
            self.gate_count += 1
            return False
        k = st.P @ h.T @ np.linalg.inv(s)
        dx = k @ innov
        st.p_bar = st.p_bar + dx[:3]
        st.v_bar = st.v_bar + dx[3:]
        i_kh = np.eye(6) - k @ h
        st.P = i_kh @ st.P @ i_kh.T + k @ (r_scalar ** 2 * np.eye(3)) @ k.T
        st.P = 0.5 * (st.P + st.P.T)
        return True

    def update_gps_pos(self, pos) -> bool:
        return self._update(0, pos, self.noise.gps_pos_noise)

    def update_gps_vel(self, vel) -> bool:
        return self._update(3, vel, self.noise.gps_vel_noise)


def estimate_oscillation_params(accel_z_pattern: PeriodicPattern,
                                gyro_y_pattern: PeriodicPattern,
                                config: AeroConfig, cond: FlightCondition):
    """Oscillation amplitudes from the fundamentals of the learned patterns.

    q_osc is the fundamental amplitude of the pitch-rate pattern;
    C_L_osc = m * (fundamental of the vertical accel pattern) / (Q S); the
    lift phase comes from the accel fundamental.  Returns None when either
    pattern is unfitted.
    """
    if accel_z_pattern is None or gyro_y_pattern is None:
        return None
    if accel_z_pattern.is_zero and gyro_y_pattern.is_zero:
        return OscillationParams()
    s_a, c_a = accel_z_pattern.harmonics()
    s_g, c_g = gyro_y_pattern.harmonics()
    amp_a = math.hypot(s_a[0], c_a[0])
    amp_g = math.hypot(s_g[0], c_g[0])
    phi_l = math.atan2(c_a[0], s_a[0])
    c_l_osc = config.m * amp_a / (cond.Q * config.S)
    params = OscillationParams(C_L_osc=c_l_osc, phi_L=phi_l, q_osc=amp_g)
    full = consistent_oscillation(config, cond, c_l_osc, phi_l)
    phi_d, _ = phase_lag(config, cond, params)
    return OscillationParams(
        C_L_osc=c_l_osc, phi_L=phi_l, alpha_osc=full.alpha_osc,
        phi_alpha=full.phi_alpha, q_osc=amp_g, phi_d=phi_d,
    )


def _harmonic_integrals(pattern: PeriodicPattern, phi: float, f: float, order: int):
    """Zero-mean time integral (order 1 or 2) of the pattern at phase ``phi``.

    Each harmonic a sin(j phi + c) integrates to -a cos(j phi + c)/(2 pi f j)
    and twice to -a sin(j phi + c)/(2 pi f j)^2, integration constants chosen
    zero-mean over the cycle.
    """
    if pattern is None or pattern.is_zero:
        return 0.0
    s, c = pattern.harmonics()
    omega = TWO_PI * f
    total = 0.0
    for j in range(1, pattern.n_harm + 1):
        sj, cj = s[j - 1], c[j - 1]
        if order == 1:
            total += (-sj * math.cos(j * phi) + cj * math.sin(j * phi)) / (omega * j)
        else:
            total += (-sj * math.sin(j * phi) - cj * math.cos(j * phi)) / (omega * j) ** 2
    return total


def reconstruct_state(p_bar, v_bar, q_att, accel_patterns, gyro_patterns,
                      phi: float, f: float):
    """Add the analytically integrated patterns back onto the internal state.

    Returns (p_rec, v_rec, q_rec): position/velocity gain the twice/once
    integrated body-frame accel pattern rotated to inertial axes; the
    attitude gains the integrated gyro pattern as a small-angle rotation.
    """
    if f <= 0.0:
        return np.asarray(p_bar).copy(), np.asarray(v_bar).copy(), np.asarray(q_att).copy()
    r_bi = quat_to_matrix(q_att)
    v1 = np.array([_harmonic_integrals(p, phi, f, 1) for p in accel_patterns])
    v2 = np.array([_harmonic_integrals(p, phi, f, 2) for p in accel_patterns])
    dtheta = np.array([_harmonic_integrals(p, phi, f, 1) for p in gyro_patterns])
    p_rec = np.asarray(p_bar) + r_bi @ v2
    v_rec = np.asarray(v_bar) + r_bi @ v1
    q_rec = quat_mult(np.asarray(q_att), quat_from_rotvec(dtheta))
    return p_rec, v_rec, q_rec
