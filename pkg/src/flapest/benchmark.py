"""Micro-benchmark comparing the compiled kernel core against the pure fallback.

Workloads mirror the pipeline hot paths: the 512-point FFT, per-tick GP mean
queries, the k-means assignment step, one-cycle cross-correlation, and the
streaming biquad.  Run via ``flapest bench`` or ``python -m flapest.benchmark``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._kernels import HAVE_COMPILED, pure

if HAVE_COMPILED:
    from ._kernels import _fastcore
else:
    _fastcore = None


@dataclass
class BenchResult:
    name: str
    pure_us: float
    compiled_us: float  # nan when the extension is unavailable

    @property
    def speedup(self) -> float:
        return self.pure_us / self.compiled_us if self.compiled_us > 0 else float("nan")


def _time(fn, reps: int) -> float:
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps * 1e6


def _workloads():
    rng = np.random.default_rng(42)
    x512 = rng.standard_normal(512)
    phis16 = rng.uniform(0, 2 * np.pi, 16)
    weights = rng.standard_normal(16)
    stack_phis = rng.uniform(0, 2 * np.pi, 160)
    s = rng.standard_normal((40, 2))
    s_hat = rng.standard_normal((40, 2))
    block = rng.standard_normal(2000)
    coeffs = (0.1, 0.2, 0.1, -1.2, 0.45)
    return [
        ("fft_radix2 (512)", 200,
         lambda mod: mod.fft_radix2(x512)),
        ("gp_mean (16 pts, 5 harm)", 2000,
         lambda mod: mod.gp_mean(phis16, weights, 1.234, 5)),
        ("kernel_matrix (16x16)", 500,
         lambda mod: mod.kernel_matrix(phis16, phis16, 5)),
        ("kmeans_assign (160x16)", 500,
         lambda mod: mod.kmeans_assign(stack_phis, phis16)),
        ("cross_corr (40x2, lag 40)", 500,
         lambda mod: mod.cross_corr(s, s_hat, 40)),
        ("biquad_block (2000)", 200,
         lambda mod: mod.biquad_block(block, *coeffs, 0.0, 0.0)),
    ]


def run_benchmarks():
    results = []
    for name, reps, fn in _workloads():
        pure_us = _time(lambda: fn(pure), reps)
        compiled_us = _time(lambda: fn(_fastcore), reps) if _fastcore else float("nan")
        results.append(BenchResult(name, pure_us, compiled_us))
    return results


def format_results(results) -> str:
    head = f"{'kernel':<28} {'pure (us)':>10} {'compiled (us)':>14} {'speedup':>8}"
    lines = [head, "-" * len(head)]
    for r in results:
        comp = f"{r.compiled_us:>14.1f}" if np.isfinite(r.compiled_us) else f"{'n/a':>14}"
        spd = f"{r.speedup:>8.1f}" if np.isfinite(r.speedup) else f"{'n/a':>8}"
        lines.append(f"{r.name:<28} {r.pure_us:>10.1f} {comp} {spd}")
    if not HAVE_COMPILED:
        lines.append("(compiled extension unavailable; pure backend active)")
    return "\n".join(lines)


if __name__ == "__main__":
    print(format_results(run_benchmarks()))
