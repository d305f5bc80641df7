"""Quaternion MARG error-state EKF on oscillation-free inertial data.

State: attitude quaternion plus gyro bias, with a 6x6 error covariance
(attitude error in the body frame, bias error).  The accelerometer observes
the gravity direction after the GPS-derived dynamic acceleration is removed;
the magnetometer contributes a heading-only update so field disturbances
cannot tilt the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rotations import (
    quat_from_rotvec,
    quat_mult,
    quat_normalize,
    quat_to_matrix,
    skew,
)

E3 = np.array([0.0, 0.0, 1.0])


@dataclass
class AttitudeNoise:
    """EKF tuning: continuous-time noise densities and gates (not paper values)."""

    gyro_noise: float = 0.02          # rad/s/sqrt(Hz)
    bias_walk: float = 1e-4           # rad/s^2/sqrt(Hz)
    accel_noise: float = 1.0          # m/s^2 per axis
    mag_heading_noise: float = 0.05   # rad
    accel_gate: float = 0.3           # fraction of g
    a_dyn_max: float = 3.0            # in g units
    g: float = 9.81


@dataclass(eq=False)
class AttitudeState:
    """Unit quaternion (body->inertial), gyro bias, 6x6 error covariance."""

    q: np.ndarray
    b_g: np.ndarray
    P: np.ndarray

    def copy(self) -> "AttitudeState":
        return AttitudeState(self.q.copy(), self.b_g.copy(), self.P.copy())


@dataclass(eq=False)
class GravityEstimate:
    """Gravity-direction observation and the dynamic acceleration removed."""

    g_body: np.ndarray
    a_dyn: np.ndarray


def initial_state(att_var: float = 0.3, bias_var: float = 1e-4) -> AttitudeState:
    p = np.zeros((6, 6))
    p[:3, :3] = att_var * np.eye(3)
    p[3:, 3:] = bias_var * np.eye(3)
    return AttitudeState(q=np.array([1.0, 0.0, 0.0, 0.0]), b_g=np.zeros(3), P=p)


class GpsAccelEstimator:
    """Dynamic (inertial) acceleration from GPS velocity differentiation.

    Finite differences are low-passed at ``f_c`` and held between updates;
    data older than ``max_age`` yields zero with a staleness flag.
    """

    def __init__(self, f_c: float = 1.0, gps_rate: float = 8.7, max_age: float = 1.0):
        from .signals import Biquad

        self._filters = [Biquad(f_c, gps_rate) for _ in range(3)]
        self.max_age = max_age
        self._t_prev = None
        self._v_prev = None
        self._a = np.zeros(3)
        self._t_last = -math.inf

    def push(self, t: float, v_gps) -> None:
        v_gps = np.asarray(v_gps, dtype=np.float64)
        if self._t_prev is not None and t > self._t_prev:
            raw = (v_gps - self._v_prev) / (t - self._t_prev)
            self._a = np.array([f.step(x) for f, x in zip(self._filters, raw)])
        self._t_prev = t
        self._v_prev = v_gps
        self._t_last = t

    def current(self, t: float):
        """Return (a_dyn, fresh); stale data gives (zeros, False)."""
        if t - self._t_last > self.max_age:
            return np.zeros(3), False
        return self._a.copy(), True


class AttitudeEkf:
    """Multiplicative error-state EKF over (attitude error, gyro bias)."""

    def __init__(self, noise: AttitudeNoise = None, mag_ref=None):
        self.noise = noise or AttitudeNoise()
        ref = np.asarray(mag_ref if mag_ref is not None else [1.0, 0.0, 0.0],
                         dtype=np.float64)
        self.mag_ref = ref / np.linalg.norm(ref)
        self.state = initial_state()
        self.gate_count = 0
        self._initialized = False

    def initialize_from(self, accel, mag=None) -> None:
        """Coarse alignment from a gravity observation and optionally mag."""
        a = np.asarray(accel, dtype=np.float64)
        if np.linalg.norm(a) < 1e-6:
            return
        z_b = a / np.linalg.norm(a)          # inertial up, in body axes
        if mag is not None and np.linalg.norm(mag) > 1e-9:
            m = np.asarray(mag, dtype=np.float64)
            m_h = m - (m @ z_b) * z_b
        else:
            m_h = np.array([1.0, 0.0, 0.0]) - z_b[0] * z_b
        if np.linalg.norm(m_h) < 1e-9:
            m_h = np.array([1.0, 0.0, 0.0])
        ref_h = self.mag_ref - self.mag_ref[2] * E3
        if np.linalg.norm(ref_h) < 1e-9 or mag is None:
            x_i_b = m_h / np.linalg.norm(m_h)
        else:
            # heading such that the rotated field matches the reference azimuth
            m_h = m_h / np.linalg.norm(m_h)
            ref_az = math.atan2(ref_h[1], ref_h[0])
            y_b = np.cross(z_b, m_h)
            x_i_b = math.cos(ref_az) * m_h - math.sin(ref_az) * y_b
        y_i_b = np.cross(z_b, x_i_b)
        r_ib = np.stack([x_i_b, y_i_b, z_b])  # rows: inertial axes in body
        w = math.sqrt(max(0.0, 1.0 + np.trace(r_ib))) / 2.0
        if w > 1e-6:
            q = np.array([
                w,
                (r_ib[2, 1] - r_ib[1, 2]) / (4 * w),
                (r_ib[0, 2] - r_ib[2, 0]) / (4 * w),
                (r_ib[1, 0] - r_ib[0, 1]) / (4 * w),
            ])
            self.state.q = quat_normalize(q)
        self._initialized = True

    def predict(self, omega, dt: float) -> None:
        """Propagate with the exact quaternion exponential of (omega - bias) dt."""
        if not 0.0 < dt <= 0.1:
            raise ValueError(f"dt out of range (0, 0.1]: {dt}")
        st = self.state
        w_eff = np.asarray(omega, dtype=np.float64) - st.b_g
        st.q = quat_normalize(quat_mult(st.q, quat_from_rotvec(w_eff * dt)))
        f = np.eye(6)
        f[:3, :3] = np.eye(3) - skew(w_eff) * dt
        f[:3, 3:] = -np.eye(3) * dt
        q_c = np.zeros((6, 6))
        q_c[:3, :3] = (self.noise.gyro_noise ** 2) * dt * np.eye(3)
        q_c[3:, 3:] = (self.noise.bias_walk ** 2) * dt * np.eye(3)
        st.P = f @ st.P @ f.T + q_c
        st.P = 0.5 * (st.P + st.P.T)

    def _apply(self, h_mat, r_mat, innov) -> None:
        st = self.state
        s = h_mat @ st.P @ h_mat.T + r_mat
        k = st.P @ h_mat.T @ np.linalg.inv(s)
        dx = k @ innov
        st.q = quat_normalize(quat_mult(st.q, quat_from_rotvec(dx[:3])))
        st.b_g = st.b_g + dx[3:]
        i_kh = np.eye(6) - k @ h_mat
        st.P = i_kh @ st.P @ i_kh.T + k @ r_mat @ k.T
        st.P = 0.5 * (st.P + st.P.T)

    def update_accel(self, a_free, a_dyn=None) -> bool:
        """Gravity-direction update from oscillation-free specific force.

        ``a_dyn`` is the inertial-frame dynamic acceleration (GPS derived);
        the gravity observation is a_free - R_I^B a_dyn, gated on magnitude.
        Returns True when the update was applied.
        """
        noise = self.noise
        a_free = np.asarray(a_free, dtype=np.float64)
        a_dyn = np.zeros(3) if a_dyn is None else np.asarray(a_dyn, dtype=np.float64)
        if np.linalg.norm(a_dyn) > noise.a_dyn_max * noise.g:
            a_dyn = np.zeros(3)
        r_bi = quat_to_matrix(self.state.q)
        g_body = a_free - r_bi.T @ a_dyn
        if abs(np.linalg.norm(g_body) - noise.g) > noise.accel_gate * noise.g:
            self.gate_count += 1
            return False
        if not self._initialized:
            self.initialize_from(g_body)
        h_pred = r_bi.T @ (noise.g * E3)
        h_mat = np.zeros((3, 6))
        h_mat[:, :3] = skew(h_pred)
        r_mat = (noise.accel_noise ** 2) * np.eye(3)
        self._apply(h_mat, r_mat, g_body - h_pred)
        return True

    def update_mag(self, m_raw) -> bool:
        """Heading-only magnetometer update (horizontal-plane projection).

        Skipped when either the reference or the rotated measurement is
        within 5 degrees of vertical, so disturbances cannot tilt the state.
        """
        m = np.asarray(m_raw, dtype=np.float64)
        n = np.linalg.norm(m)
        if n < 1e-9:
            return False
        m = m / n
        r_bi = quat_to_matrix(self.state.q)
        m_i = r_bi @ m
        ref = self.mag_ref
        min_h = math.cos(math.radians(85.0))
        if math.hypot(m_i[0], m_i[1]) < min_h or math.hypot(ref[0], ref[1]) < min_h:
            return False
        innov = math.atan2(m_i[0] * ref[1] - m_i[1] * ref[0],
                           m_i[0] * ref[0] + m_i[1] * ref[1])
        h_mat = np.zeros((1, 6))
        h_mat[0, :3] = r_bi.T @ E3
        r_mat = np.array([[self.noise.mag_heading_noise ** 2]])
        self._apply(h_mat, r_mat, np.array([innov]))
        return True


class ComplementaryFilter:
    """Fixed-gain complementary attitude baseline (gyro + accel tilt + mag)."""

    def __init__(self, k_acc: float = 0.02, k_mag: float = 0.01, g: float = 9.81,
                 mag_ref=None):
        self.k_acc = k_acc
        self.k_mag = k_mag
        self.g = g
        ref = np.asarray(mag_ref if mag_ref is not None else [1.0, 0.0, 0.0])
        self.mag_ref = ref / np.linalg.norm(ref)
        self.q = np.array([1.0, 0.0, 0.0, 0.0])

    def step(self, omega, accel, dt: float, mag=None) -> None:
        self.q = quat_normalize(quat_mult(self.q, quat_from_rotvec(np.asarray(omega) * dt)))
        a = np.asarray(accel, dtype=np.float64)
        n = np.linalg.norm(a)
        if n > 1e-6 and abs(n - self.g) < 0.5 * self.g:
            z_meas = a / n
            z_pred = quat_to_matrix(self.q).T @ E3
            corr = np.cross(z_pred, z_meas)
            self.q = quat_normalize(quat_mult(self.q, quat_from_rotvec(-self.k_acc * corr)))
        if mag is not None:
            m = np.asarray(mag, dtype=np.float64)
            if np.linalg.norm(m) > 1e-9:
                r_bi = quat_to_matrix(self.q)
                m_i = r_bi @ (m / np.linalg.norm(m))
                if math.hypot(m_i[0], m_i[1]) > 0.1:
                    innov = math.atan2(m_i[0] * self.mag_ref[1] - m_i[1] * self.mag_ref[0],
                                       m_i[0] * self.mag_ref[0] + m_i[1] * self.mag_ref[1])
                    self.q = quat_normalize(quat_mult(
                        self.q, quat_from_rotvec(self.k_mag * innov * (r_bi.T @ E3))))
