import numpy as np
import pytest

from rtaprop import _kernels
from rtaprop.geo import FlightPlan, GeoWaypoint, to_local_frame
from rtaprop.spline import fit_trajectory

FIXTURES = __import__("pathlib").Path(__file__).resolve().parent.parent / "fixtures"

M_PER_DEG_LAT = 111132.0


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile (or no-op) once so timed tests measure steady-state behavior.
    _kernels.warmup()


def offset_waypoint(lat0, lon0, alt0, east_m, north_m, up_m, rta):
    lat = lat0 + north_m / M_PER_DEG_LAT
    lon = lon0 + east_m / (111320.0 * np.cos(np.deg2rad(lat0)))
    return GeoWaypoint(lat, lon, alt0 + up_m, rta)


def plan_from_legs(plan_id, legs, lat0=39.7, lon0=-104.9, alt0=1700.0):
    wps = tuple(offset_waypoint(lat0, lon0, alt0, e, n, u, t) for e, n, u, t in legs)
    return FlightPlan(plan_id=plan_id, waypoints=wps)


def straight_plan(speed=10.0, duration=60.0, plan_id="STRAIGHT"):
    return plan_from_legs(plan_id, [
        (0.0, 0.0, 0.0, 0.0),
        (speed * duration, 0.0, 0.0, duration),
    ])


def l_shape_plan():
    return plan_from_legs("L-SHAPE", [
        (0.0, 0.0, 0.0, 0.0),
        (600.0, 0.0, 0.0, 60.0),
        (600.0, 600.0, 0.0, 120.0),
    ])


def six_wp_plan():
    return plan_from_legs("SIX-WP", [
        (0.0, 0.0, 0.0, 0.0),
        (550.0, 80.0, 30.0, 50.0),
        (1150.0, 300.0, 60.0, 105.0),
        (1600.0, 750.0, 80.0, 160.0),
        (1850.0, 1400.0, 60.0, 220.0),
        (1900.0, 2100.0, 20.0, 285.0),
    ])


def prepared(plan):
    local = to_local_frame(plan)
    return local, fit_trajectory(local)


@pytest.fixture
def straight_local():
    return prepared(straight_plan())


@pytest.fixture
def l_shape_local():
    return prepared(l_shape_plan())


@pytest.fixture
def six_wp_local():
    return prepared(six_wp_plan())
