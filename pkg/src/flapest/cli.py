"""Command-line front-end: simulate, estimate, compare, bench.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric divergence.  Log
verbosity follows FLAPEST_LOG_LEVEL in {error, warn, info, debug}.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import benchmark as bench_mod
from .compare import GridData, evaluate, format_table
from .config import FullConfig, dump_config, load_config
from .logio import (
    DataError,
    LOG_HEADER,
    TRUTH_HEADER,
    read_log,
    read_table,
    read_truth,
    table_columns,
    write_log,
    write_table,
    write_truth,
)
from .patterns import pattern_grid
from .pipeline import run_pipeline
from .rotations import quat_to_euler
from .signals import Channel
from .simulator import DivergenceError, FwavSimulator

log = logging.getLogger("flapest")

SIGNAL_HEADER = ["t", "raw_ax", "raw_ay", "raw_az", "raw_gx", "raw_gy", "raw_gz",
                 "free_ax", "free_ay", "free_az", "free_gx", "free_gy", "free_gz",
                 "phi", "f_freq", "var_freq", "pattern_id"]
ATTITUDE_HEADER = ["t", "qw", "qx", "qy", "qz", "roll", "pitch", "yaw"]
TRAJECTORY_HEADER = ["t", "px", "py", "pz", "vx", "vy", "vz",
                     "rec_px", "rec_py", "rec_pz", "rec_vx", "rec_vy", "rec_vz",
                     "rec_qw", "rec_qx", "rec_qy", "rec_qz"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="flapest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="generate a synthetic flight log")
    p_sim.add_argument("--config", type=Path, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--duration", type=float, default=60.0)
    p_sim.add_argument("--out", type=Path, required=True)

    p_est = sub.add_parser("estimate", help="replay a log through the estimator")
    p_est.add_argument("log", type=Path)
    p_est.add_argument("--config", type=Path, default=None)
    p_est.add_argument("--out", type=Path, required=True)
    p_est.add_argument("--truth", type=Path, default=None)

    p_cmp = sub.add_parser("compare", help="score estimator baselines vs truth")
    p_cmp.add_argument("--config", type=Path, default=None)
    p_cmp.add_argument("--out", type=Path, required=True,
                       help="directory holding estimate outputs")
    p_cmp.add_argument("--truth", type=Path, required=True)

    p_cfg = sub.add_parser("dump-config", help="print the full default config")
    p_cfg.add_argument("--config", type=Path, default=None)

    sub.add_parser("bench", help="benchmark compiled vs pure kernels")
    return parser


def _load(config_path) -> FullConfig:
    if config_path is None:
        return FullConfig()
    return load_config(config_path)


def cmd_sim(config: FullConfig, duration: float, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "log.csv"
    truth_path = out_dir / "truth.csv"
    if duration <= 0.0:
        write_log(log_path, [])
        write_table(truth_path, TRUTH_HEADER, [])
        return 0
    sim = FwavSimulator(config.sim)
    samples, truth = sim.run(duration)
    write_log(log_path, samples)
    write_truth(truth_path, truth)
    log.info("wrote %d samples to %s", len(samples), log_path)
    return 0


def _write_outputs(out_dir: Path, pipe, outs, samples) -> None:
    rows = []
    for o in outs:
        rows.append([o.t, *o.raw_accel, *o.raw_gyro, *o.free_accel, *o.free_gyro,
                     o.phi, o.f_freq, o.var_freq, float(o.pattern_id)])
    write_table(out_dir / "signals.csv", SIGNAL_HEADER, rows)

    rows = []
    for o in outs:
        roll, pitch, yaw = quat_to_euler(o.q_att)
        rows.append([o.t, *o.q_att, roll, pitch, yaw])
    write_table(out_dir / "attitude.csv", ATTITUDE_HEADER, rows)

    rows = []
    for o in outs:
        rows.append([o.t, *o.p_bar, *o.v_bar, *o.p_rec, *o.v_rec, *o.q_rec])
    write_table(out_dir / "trajectory.csv", TRAJECTORY_HEADER, rows)

    rows = []
    for (channel, axis), pattern in pipe.patterns.items():
        phis, means, stds = pattern_grid(pattern)
        for i in range(len(phis)):
            rows.append([channel.value, float(axis), phis[i],
                         means[i] + pattern.removed_mean, stds[i]])
    write_table(out_dir / "patterns.csv",
                ["channel", "axis", "phi", "mean", "std"], rows)

    rows = []
    for t, spec in pipe.spectrogram:
        for f, m in zip(spec.bin_freqs, spec.magnitudes):
            rows.append([t, f, m])
    write_table(out_dir / "spectrogram.csv", ["t", "bin_freq", "magnitude"], rows)

    mag_rows = [[s.t, *s.value] for s in samples if s.channel == Channel.MAG]
    write_table(out_dir / "mag.csv", ["t", "mx", "my", "mz"], mag_rows)
    gps_rows = [[s.t, s.channel.value, *s.value] for s in samples
                if s.channel in (Channel.GPS_POS, Channel.GPS_VEL)]
    write_table(out_dir / "gps.csv", ["t", "kind", "v0", "v1", "v2"], gps_rows)


def _grid_from_outputs(outs, samples, config: FullConfig) -> GridData:
    f_vals = np.array([o.f_freq for o in outs])
    f_flap = float(np.nanmedian(f_vals)) if np.any(np.isfinite(f_vals)) else \
        0.5 * (config.pipeline.band_lo + config.pipeline.band_hi)
    return GridData(
        t=np.array([o.t for o in outs]),
        raw_accel=np.array([o.raw_accel for o in outs]),
        raw_gyro=np.array([o.raw_gyro for o in outs]),
        free_accel=np.array([o.free_accel for o in outs]),
        free_gyro=np.array([o.free_gyro for o in outs]),
        f_flap=f_flap,
        mag=[(s.t, s.value) for s in samples if s.channel == Channel.MAG],
        gps_vel=[(s.t, s.value) for s in samples if s.channel == Channel.GPS_VEL],
        q_proposed=np.array([o.q_att for o in outs]),
        q_reconstructed=np.array([o.q_rec for o in outs]),
    )


def _grid_from_dir(out_dir: Path, config: FullConfig) -> GridData:
    sig = table_columns(out_dir / "signals.csv", SIGNAL_HEADER)
    att = table_columns(out_dir / "attitude.csv", ATTITUDE_HEADER)
    trj = table_columns(out_dir / "trajectory.csv", TRAJECTORY_HEADER)
    magc = table_columns(out_dir / "mag.csv", ["t", "mx", "my", "mz"])
    header, rows = read_table(out_dir / "gps.csv")
    gps_vel = [(float(r[0]), np.array([float(r[2]), float(r[3]), float(r[4])]))
               for r in rows if r[1] == "gps_vel"]
    f_vals = sig["f_freq"]
    f_flap = float(np.nanmedian(f_vals)) if np.any(np.isfinite(f_vals)) else \
        0.5 * (config.pipeline.band_lo + config.pipeline.band_hi)
    mag = [(float(magc["t"][i]),
            np.array([magc["mx"][i], magc["my"][i], magc["mz"][i]]))
           for i in range(len(magc["t"]))]
    return GridData(
        t=sig["t"],
        raw_accel=np.stack([sig["raw_ax"], sig["raw_ay"], sig["raw_az"]], axis=1),
        raw_gyro=np.stack([sig["raw_gx"], sig["raw_gy"], sig["raw_gz"]], axis=1),
        free_accel=np.stack([sig["free_ax"], sig["free_ay"], sig["free_az"]], axis=1),
        free_gyro=np.stack([sig["free_gx"], sig["free_gy"], sig["free_gz"]], axis=1),
        f_flap=f_flap,
        mag=mag,
        gps_vel=gps_vel,
        q_proposed=np.stack([att["qw"], att["qx"], att["qy"], att["qz"]], axis=1),
        q_reconstructed=np.stack([trj["rec_qw"], trj["rec_qx"],
                                  trj["rec_qy"], trj["rec_qz"]], axis=1),
    )


def _metrics_rows(metrics):
    return [[m.method, m.rms_roll_deg, m.rms_pitch_deg, m.rms_yaw_deg,
             m.rms_angle_deg, float(m.latency_ticks), float(m.osc_pitch_lag)]
            for m in metrics]


METRICS_HEADER = ["method", "rms_roll_deg", "rms_pitch_deg", "rms_yaw_deg",
                  "rms_angle_deg", "latency_ticks", "osc_pitch_lag"]


def cmd_estimate(config: FullConfig, log_path: Path, out_dir: Path,
                 truth_path: Path = None) -> int:
    samples = read_log(log_path)
    channels = {s.channel for s in samples}
    if Channel.ACCEL not in channels or Channel.GYRO not in channels:
        raise DataError(f"{log_path}: insufficient channels for estimation "
                        f"(need accel and gyro, got {sorted(c.value for c in channels)})")
    out_dir.mkdir(parents=True, exist_ok=True)
    pipe, outs = run_pipeline(samples, config.pipeline)
    _write_outputs(out_dir, pipe, outs, samples)
    print(f"processed {len(samples)} samples -> {len(outs)} grid rows")
    print("counters:", pipe.counters)
    if truth_path is not None and outs:
        truth = read_truth(truth_path)
        metrics, _ = evaluate(_grid_from_outputs(outs, samples, config),
                              truth, config.pipeline)
        write_table(out_dir / "metrics.csv", METRICS_HEADER, _metrics_rows(metrics))
        print(format_table(metrics))
    return 0


def cmd_compare(config: FullConfig, out_dir: Path, truth_path: Path) -> int:
    truth = read_truth(truth_path)
    grid = _grid_from_dir(out_dir, config)
    metrics, _ = evaluate(grid, truth, config.pipeline)
    write_table(out_dir / "metrics.csv", METRICS_HEADER, _metrics_rows(metrics))
    print(format_table(metrics))
    return 0


def main(argv=None) -> int:
    level = os.environ.get("FLAPEST_LOG_LEVEL", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING))
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "sim":
            config = _load(args.config)
            if args.seed is not None:
                config.sim.seed = args.seed
            return cmd_sim(config, args.duration, args.out)
        if args.command == "estimate":
            return cmd_estimate(_load(args.config), args.log, args.out, args.truth)
        if args.command == "compare":
            return cmd_compare(_load(args.config), args.out, args.truth)
        if args.command == "dump-config":
            print(dump_config(_load(args.config)), end="")
            return 0
        if args.command == "bench":
            print(bench_mod.format_results(bench_mod.run_benchmarks()))
            return 0
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, FloatingPointError) as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return 3
    return 1


if __name__ == "__main__":
    sys.exit(main())
