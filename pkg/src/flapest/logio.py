"""Canonical CSV formats: sensor logs, truth logs, and estimator outputs.

The sensor log has columns t_sec, channel, v0, v1, v2 (UTF-8, header row,
decimal point).  Rows need not be globally time-sorted but must be
per-channel sorted.  Floats are written with repr-level precision so
parse-then-serialize is lossless.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .signals import Channel, TimedSample

LOG_HEADER = ["t_sec", "channel", "v0", "v1", "v2"]

TRUTH_HEADER = [
    "t", "u", "w", "theta", "q_rate", "phi", "roll",
    "px", "py", "pz", "vx", "vy", "vz", "c_l", "c_t", "c_d",
    "sf_x", "sf_y", "sf_z", "om_x", "om_y", "om_z",
    "osc_ax", "osc_ay", "osc_az", "osc_gx", "osc_gy", "osc_gz",
]


class DataError(ValueError):
    """Malformed input data (reported with file and line number)."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_log(path, samples) -> None:
    """Write TimedSamples as the canonical log CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(LOG_HEADER)
        for s in samples:
            v = s.value
            wr.writerow([_fmt(s.t), s.channel.value,
                         _fmt(v[0]), _fmt(v[1]), _fmt(v[2])])


def read_log(path):
    """Parse the canonical log CSV into TimedSamples (file order preserved)."""
    samples = []
    last_t = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        for lineno, row in enumerate(rd, start=1):
            if lineno == 1:
                if row != LOG_HEADER:
                    raise DataError(f"{path}:1: bad header {row!r}")
                continue
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                t = float(row[0])
                ch = Channel(row[1])
                v = np.array([float(row[2]), float(row[3]), float(row[4])])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if not math.isfinite(t) or not np.all(np.isfinite(v)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if ch in last_t and t < last_t[ch]:
                raise DataError(f"{path}:{lineno}: channel {ch.value} not time-sorted")
            last_t[ch] = t
            samples.append(TimedSample(t, ch, v))
    return samples


def write_truth(path, truth) -> None:
    """Write a TruthLog as CSV (one row per integrator step)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(TRUTH_HEADER)
        for i in range(len(truth)):
            row = [truth.t[i], truth.u[i], truth.w[i], truth.theta[i],
                   truth.q[i], truth.phi[i], truth.roll[i],
                   *truth.pos[i], *truth.vel[i], *truth.coeffs[i],
                   *truth.specific_force[i], *truth.omega[i],
                   *truth.osc_accel[i], *truth.osc_gyro[i]]
            wr.writerow([_fmt(x) for x in row])


def read_truth(path):
    """Read a truth CSV back into a dict of float64 column arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header != TRUTH_HEADER:
            raise DataError(f"{path}:1: bad truth header")
        rows = []
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    data = np.asarray(rows, dtype=np.float64)
    if data.size == 0:
        data = np.empty((0, len(TRUTH_HEADER)))
    return {name: data[:, i] for i, name in enumerate(TRUTH_HEADER)}


def write_table(path, header, rows) -> None:
    """Write a generic numeric CSV table with repr-precision floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([x if isinstance(x, str) else _fmt(x) for x in row])


def read_table(path):
    """Read a generic CSV table into (header, list of string rows)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd, [])
        return header, [row for row in rd if row]


def table_columns(path, names):
    """Read selected numeric columns of a CSV table as float arrays."""
    header, rows = read_table(path)
    idx = []
    for n in names:
        if n not in header:
            raise DataError(f"{path}: missing column {n!r}")
        idx.append(header.index(n))
    data = np.asarray([[float(r[i]) for i in idx] for r in rows])
    if data.size == 0:
        data = np.empty((0, len(names)))
    return {n: data[:, j] for j, n in enumerate(names)}
