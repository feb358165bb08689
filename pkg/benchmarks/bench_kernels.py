#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the filter recurrence and the Monte Carlo rollout on a 2-hour,
100-waypoint plan at 1 s stride.  The numba path must be available (do not
set RTAPROP_NO_NUMBA when running this).

Usage: python benchmarks/bench_kernels.py [--samples N]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from rtaprop import _kernels  # noqa: E402
from rtaprop.geo import FlightPlan, GeoWaypoint, to_local_frame  # noqa: E402
from rtaprop.kalman import FilterConfig, build_schedule, initial_state  # noqa: E402
from rtaprop.spline import fit_trajectory  # noqa: E402


def hundred_waypoint_plan():
    rng = np.random.default_rng(3)
    lat0, lon0 = 39.7, -104.9
    wps = []
    t = east = north = heading = 0.0
    duration = 7200.0 / 99.0
    for i in range(100):
        lat = lat0 + north / 111132.0
        lon = lon0 + east / (111320.0 * np.cos(np.deg2rad(lat0)))
        wps.append(GeoWaypoint(lat, lon, 1700.0 + 10.0 * np.sin(0.2 * i), t))
        heading += rng.uniform(-0.3, 0.3)
        east += 30.0 * np.cos(heading) * duration
        north += 30.0 * np.sin(heading) * duration
        t += duration
    return FlightPlan(plan_id="BENCH", waypoints=tuple(wps))


def time_call(fn, *args, repeats=3):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=2000,
                        help="Monte Carlo samples per backend")
    args = parser.parse_args()

    if not _kernels.NUMBA_ENABLED:
        print("numba backend unavailable (RTAPROP_NO_NUMBA set?); aborting")
        return 1

    plan = hundred_waypoint_plan()
    local = to_local_frame(plan)
    spline = fit_trajectory(local)
    cfg = FilterConfig()
    sched = build_schedule(spline, local, cfg)
    entry = initial_state(local)
    n_steps = sched.n_steps
    print(f"workload: {len(plan.waypoints)} waypoints, {n_steps} steps, "
          f"{args.samples} MC samples\n")

    filter_args = (entry.mean.copy(), entry.covariance.copy(), sched.dts,
                   sched.us, sched.zs, sched.step_qscale, sched.mask,
                   cfg.sigma_a2)
    _kernels.filter_steps_numba(*filter_args)  # compile before timing
    t_jit, (_, _, kp, kv) = time_call(_kernels.filter_steps_numba, *filter_args)
    t_np, _ = time_call(_kernels.filter_steps_numpy, *filter_args)
    print(f"filter recurrence ({n_steps} steps):")
    print(f"  numba {t_jit * 1e3:8.2f} ms")
    print(f"  numpy {t_np * 1e3:8.2f} ms   ({t_np / t_jit:.1f}x slower)\n")

    rng = np.random.default_rng(0)
    n = args.samples
    x0 = np.tile(entry.mean, (n, 1))
    na = rng.standard_normal((n, n_steps, 3))
    nv = rng.standard_normal((n, n_steps, 3))
    sqrt_q = np.sqrt(sched.step_qscale)
    mc_args = (x0, na, nv, sched.dts, sched.us, sched.zs,
               np.ascontiguousarray(kp), np.ascontiguousarray(kv),
               sched.mask, 1.0, sqrt_q)
    _kernels.mc_rollout_block_numba(*mc_args)  # compile before timing
    t_jit, out_jit = time_call(_kernels.mc_rollout_block_numba, *mc_args,
                               repeats=2)
    t_np, out_np = time_call(_kernels.mc_rollout_block_numpy, *mc_args,
                             repeats=2)
    np.testing.assert_allclose(out_jit, out_np, rtol=1e-9, atol=1e-9)
    print(f"Monte Carlo rollout ({n} samples x {n_steps} steps):")
    print(f"  numba {t_jit:8.3f} s")
    print(f"  numpy {t_np:8.3f} s   ({t_np / t_jit:.1f}x slower)")
    print("\nbackend outputs agree to 1e-9; "
          f"active backend: {_kernels.backend_name()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
