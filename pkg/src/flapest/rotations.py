"""Quaternion and rotation helpers.

Conventions: quaternions are [w, x, y, z] unit arrays mapping body to
inertial; the inertial frame has Z up with gravity acceleration -g e3; Euler
angles are intrinsic Z-Y-X (yaw, pitch, roll).
"""

from __future__ import annotations

import math

import numpy as np


def quat_mult(p, q):
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q):
    return np.asarray(q, dtype=np.float64) / np.linalg.norm(q)


def quat_from_rotvec(v):
    """Exact quaternion exponential of a rotation vector."""
    v = np.asarray(v, dtype=np.float64)
    angle = float(np.linalg.norm(v))
    if angle < 1e-12:
        # second-order series keeps the group property for tiny steps
        half = 0.5 * v
        return quat_normalize(np.array([1.0 - 0.125 * angle * angle, *half]))
    axis = v / angle
    s = math.sin(0.5 * angle)
    return np.array([math.cos(0.5 * angle), s * axis[0], s * axis[1], s * axis[2]])


def quat_to_matrix(q):
    """Rotation matrix (body -> inertial) of a unit quaternion."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_rotate(q, v):
    """Rotate vector ``v`` from body to inertial frame."""
    return quat_to_matrix(q) @ np.asarray(v, dtype=np.float64)


def quat_to_euler(q):
    """Intrinsic Z-Y-X angles (roll, pitch, yaw) of a unit quaternion."""
    w, x, y, z = q
    roll = math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    s = 2 * (w * y - z * x)
    pitch = math.asin(max(-1.0, min(1.0, s)))
    yaw = math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return roll, pitch, yaw


def quat_from_euler(roll, pitch, yaw):
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    return np.array([
        cy * cp * cr + sy * sp * sr,
        cy * cp * sr - sy * sp * cr,
        cy * sp * cr + sy * cp * sr,
        sy * cp * cr - cy * sp * sr,
    ])


def skew(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def quat_angle_error(q_est, q_true) -> float:
    """Total rotation angle (rad) between two attitudes."""
    dq = quat_mult(quat_conj(q_true), q_est)
    w = min(1.0, abs(float(dq[0])))
    return 2.0 * math.acos(w)
