"""Benchmark: compiled core vs pure-Python fallback.

Per-kernel microbenchmarks run both backends in-process; the end-to-end
prequential run is timed in subprocesses so each backend is selected the same
way production imports select it (DRIFTLAB_PURE_PYTHON=1 forces the fallback).

Usage: python benchmarks/bench_core.py [--steps 20000] [--micro-iters 200000]
"""

from __future__ import annotations

import argparse
import json
import math
import os
import subprocess
import sys
import time

import numpy as np

from driftlab._core import _pure

try:
    from driftlab._core import _speed
except ImportError:
    _speed = None


def _time(fn, *args, iters):
    start = time.perf_counter()
    for _ in range(iters):
        fn(*args)
    return time.perf_counter() - start


def micro_benchmarks(iters: int) -> list[tuple[str, float, float]]:
    rng = np.random.default_rng(0)
    x = rng.normal(size=9)
    w = rng.normal(size=9)
    counts = np.asarray(2.0 ** rng.integers(0, 6, size=24), dtype=float)
    sums = counts * rng.random(24)
    rows = []

    def bench(name, pure_call, speed_call):
        t_pure = _time(*pure_call, iters=iters)
        t_speed = _time(*speed_call, iters=iters) if _speed else float("nan")
        rows.append((name, t_pure, t_speed))

    sp = np.zeros(4)
    sp[2] = sp[3] = math.inf
    sc = sp.copy()
    bench("ddm_update", (_pure.ddm_update, sp, 0.0, 30), (_speed.ddm_update, sc, 0.0, 30) if _speed else None)
    sp = np.zeros(4)
    sc = np.zeros(4)
    bench("ph_update", (_pure.ph_update, sp, 0.5, 0.005, 50.0), (_speed.ph_update, sc, 0.5, 0.005, 50.0) if _speed else None)
    bench(
        "adwin_scan(24 buckets)",
        (_pure.adwin_should_drop, counts, sums, 24, 0.002),
        (_speed.adwin_should_drop, counts, sums, 24, 0.002) if _speed else None,
    )
    bench("linear_margin(d=9)", (_pure.linear_margin, w, 0.1, x), (_speed.linear_margin, w, 0.1, x) if _speed else None)
    wp, wc = w.copy(), w.copy()
    bench("logloss_step(d=9)", (_pure.logloss_step, wp, 0.0, x, 1.0, 0.05), (_speed.logloss_step, wc, 0.0, x, 1.0, 0.05) if _speed else None)
    wp, wc = np.zeros(9), np.zeros(9)
    bench("pegasos_step(d=9)", (_pure.pegasos_step, wp, 0.0, x, 1.0, 1e-4, 100), (_speed.pegasos_step, wc, 0.0, x, 1.0, 1e-4, 100) if _speed else None)
    return rows


END_TO_END = r"""
import json, time
from driftlab._core import BACKEND
from driftlab.evaluate import ExperimentConfig, run_single

raw = {
    "dataset": {"id": "stagger", "confounded": True, "total": %d,
                "segment_len": %d, "concepts": ["phi1", "phi2"]},
    "learner": {"kind": "lr", "learning_rate": 0.1},
    "detector": {"kind": "ddm", "warmup": 30},
    "method": "exstream",
    "exstream": {"theta": 0.1, "cadence": 25, "ref_window": 40,
                 "ref_mode": "anchored", "agg_points": 16},
    "seeds": [1],
}
cfg = ExperimentConfig.from_dict(raw)
start = time.perf_counter()
result = run_single(cfg, 1)
elapsed = time.perf_counter() - start
print(json.dumps({"backend": BACKEND, "seconds": elapsed,
                  "alarms": len(result.alarm_steps)}))
"""


def end_to_end(steps: int) -> list[dict]:
    code = END_TO_END % (steps, steps // 2)
    out = []
    for env_value in ("0", "1"):
        env = dict(os.environ, DRIFTLAB_PURE_PYTHON=env_value)
        proc = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
        )
        out.append(json.loads(proc.stdout.strip().splitlines()[-1]))
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20000, help="end-to-end stream length")
    parser.add_argument("--micro-iters", type=int, default=200000)
    args = parser.parse_args()

    if _speed is None:
        print("compiled core not built; micro rows show the pure backend only\n")

    print(f"{'kernel':<24} {'pure':>12} {'compiled':>12} {'speedup':>9}")
    for name, t_pure, t_speed in micro_benchmarks(args.micro_iters):
        per_pure = t_pure / args.micro_iters * 1e9
        per_speed = t_speed / args.micro_iters * 1e9
        ratio = t_pure / t_speed if t_speed == t_speed else float("nan")
        print(f"{name:<24} {per_pure:>9.0f} ns {per_speed:>9.0f} ns {ratio:>8.1f}x")

    print(f"\nend-to-end: c-stagger LR+DDM exstream, {args.steps} steps")
    runs = end_to_end(args.steps)
    for run in runs:
        print(f"  {run['backend']:<9} {run['seconds']:.2f} s  (alarms: {run['alarms']})")
    if len(runs) == 2 and runs[0]["backend"] != runs[1]["backend"]:
        by = {r["backend"]: r["seconds"] for r in runs}
        if "compiled" in by and "pure" in by:
            print(f"  end-to-end speedup: {by['pure'] / by['compiled']:.2f}x")
            same = runs[0]["alarms"] == runs[1]["alarms"]
            print(f"  identical alarm counts across backends: {same}")


if __name__ == "__main__":
    main()
