#!/usr/bin/env python3
"""Regenerate the checked-in fixture corpus under fixtures/.

Plans are small AAM-scale routes; the ADS-B corpus is synthetic but styled
after general-aviation flights (C172-class speeds and altitudes, 1 Hz
samples, position scatter, small schedule slips, shifted epochs).
"""

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from rtaprop.geo import (  # noqa: E402
    FlightPlan,
    GeoWaypoint,
    serialize_flight_plan,
    to_local_frame,
)
from rtaprop.spline import fit_trajectory  # noqa: E402
from rtaprop.tuning import serialize_adsb, synthesize_track  # noqa: E402


def offset_waypoint(lat0, lon0, alt0, east_m, north_m, up_m, rta):
    lat = lat0 + north_m / 111132.0
    lon = lon0 + east_m / (111320.0 * np.cos(np.deg2rad(lat0)))
    return GeoWaypoint(lat, lon, alt0 + up_m, rta)


def route(plan_id, lat0, lon0, alt0, legs):
    """legs: rows of (east_m, north_m, up_m, rta_s) including the origin."""
    wps = tuple(offset_waypoint(lat0, lon0, alt0, e, n, u, t)
                for e, n, u, t in legs)
    return FlightPlan(plan_id=plan_id, waypoints=wps)


def main():
    plans_dir = ROOT / "fixtures" / "plans"
    adsb_dir = ROOT / "fixtures" / "adsb"
    config_dir = ROOT / "fixtures" / "config"
    for d in (plans_dir, adsb_dir, config_dir):
        d.mkdir(parents=True, exist_ok=True)

    # Denver-area AAM-scale test routes.
    straight = route("STRAIGHT-60S", 39.7, -104.9, 1700.0, [
        (0, 0, 0, 0.0),
        (600, 0, 0, 60.0),
    ])
    l_shape = route("L-SHAPE", 39.7, -104.9, 1700.0, [
        (0, 0, 0, 0.0),
        (600, 0, 0, 60.0),
        (600, 600, 0, 120.0),
    ])
    six_wp = route("SIX-WP", 39.7, -104.9, 1700.0, [
        (0, 0, 0, 0.0),
        (550, 80, 30, 50.0),
        (1150, 300, 60, 105.0),
        (1600, 750, 80, 160.0),
        (1850, 1400, 60, 220.0),
        (1900, 2100, 20, 285.0),
    ])
    for plan in (straight, l_shape, six_wp):
        name = plan.plan_id.lower().replace("-", "_") + ".yaml"
        (plans_dir / name).write_text(serialize_flight_plan(plan))
        print("wrote", plans_dir / name)

    # Synthetic GA-style corpus: C172-class local flights near KLMO.
    ga_legs = [
        (0, 0, 0, 0.0),
        (2500, 500, 150, 55.0),
        (5200, 1800, 300, 120.0),
        (7600, 3900, 350, 185.0),
        (9200, 6500, 250, 250.0),
    ]
    rng = np.random.default_rng(20240501)
    for i in range(4):
        fid = f"ga_{i:04d}"
        plan = route(fid.upper(), 40.164, -105.163, 1600.0, ga_legs)
        local = to_local_frame(plan)
        spline = fit_trajectory(local)
        sigma = rng.uniform(12.0, 25.0)
        track = synthesize_track(
            plan, spline,
            noise_cov=sigma**2 * np.diag([1.0, 1.0, 0.4]),
            seed=1000 + i,
            flight_id=fid,
            rate_hz=1.0,
            epoch_offset=float(rng.uniform(30.0, 240.0)),
            arrival_offset=float(rng.normal(0.0, 4.0)),
            pad=25.0,
        )
        (plans_dir / f"{fid}.yaml").write_text(serialize_flight_plan(plan))
        (adsb_dir / f"{fid}.csv").write_text(serialize_adsb(track))
        print("wrote", adsb_dir / f"{fid}.csv")

    (config_dir / "default.yaml").write_text(
        "# Default run configuration (all keys shown with their defaults).\n"
        "dt_s: 1.0\n"
        "sigma_a2_m2s4: 1.0\n"
        "q_max_scale: 1.0e8\n"
        "q_min_scale: 1.0\n"
        "k_gain: 10.0\n"
        "lpa: 0.0\n"
        "progress_mode: time\n"
        "confidence: 0.95\n"
        "delta_threshold: 1.0\n"
        "v_bar0_mps: null\n"
        "mc_samples: 10000\n"
        "mc_block: 128\n"
        "seed: 0\n"
        "ulpa_growth_rate: 1.06\n"
        "ulpa_activation_fraction: 0.6666666666666666\n"
        "ulpa_rta_tolerance_s: 10.0\n"
        "tune_max_rms_m: 500.0\n"
        "tune_train_fraction: 0.7\n"
    )
    print("wrote", config_dir / "default.yaml")


if __name__ == "__main__":
    main()
