"""Flight-plan parsing and projection into a local metric frame.

Plans arrive as geodetic waypoints (WGS-84 latitude/longitude in degrees,
ellipsoidal altitude in meters) each carrying a required time of arrival
(RTA) in seconds since the plan epoch.  The propagation machinery is linear
and Cartesian, so plans are projected into an East-North-Up (ENU) tangent
frame anchored at the first waypoint via geodetic -> ECEF -> ENU.  At the
route scales this package targets (tens of km) the projection is accurate
to well under 0.1% of separation.

Altitudes are ellipsoidal heights; the plan file must declare
``altitude_reference: ellipsoid`` and anything else is rejected rather than
silently mixing datums.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import PlanError

# WGS-84 ellipsoid
WGS84_A = 6378137.0                  # semi-major axis [m]
WGS84_F = 1.0 / 298.257223563        # flattening
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)  # first eccentricity squared

# Consecutive waypoints closer than this (3D) are considered coincident;
# they would create zero-length segments downstream.
MIN_WAYPOINT_SEPARATION_M = 1.0

ALTITUDE_REFERENCES = ("ellipsoid",)


@dataclass(frozen=True)
class GeoWaypoint:
    """One 4D waypoint: position in WGS-84, arrival time in plan seconds."""

    latitude: float    # degrees, [-90, 90]
    longitude: float   # degrees, [-180, 180]
    altitude: float    # meters above the WGS-84 ellipsoid
    rta: float         # seconds since plan epoch, finite and >= 0

    def validate(self, index: int) -> None:
        if not np.isfinite([self.latitude, self.longitude, self.altitude, self.rta]).all():
            raise PlanError(f"non-finite field at waypoint index {index}")
        if not -90.0 <= self.latitude <= 90.0:
            raise PlanError(f"latitude {self.latitude} out of range at index {index}")
        if not -180.0 <= self.longitude <= 180.0:
            raise PlanError(f"longitude {self.longitude} out of range at index {index}")
        if self.rta < 0.0:
            raise PlanError(f"negative RTA at index {index}")


@dataclass(frozen=True)
class FlightPlan:
    """Ordered 4D waypoints with strictly increasing RTAs."""

    plan_id: str
    waypoints: tuple[GeoWaypoint, ...]

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise PlanError("flight plan needs at least 2 waypoints")
        for i, wp in enumerate(self.waypoints):
            wp.validate(i)
        for i in range(1, len(self.waypoints)):
            if not self.waypoints[i].rta > self.waypoints[i - 1].rta:
                raise PlanError(f"non-monotone RTA at index {i}")
        # Coincidence check in ECEF so it is frame-independent.
        ecef = np.stack(
            [geodetic_to_ecef(w.latitude, w.longitude, w.altitude) for w in self.waypoints]
        )
        seps = np.linalg.norm(np.diff(ecef, axis=0), axis=1)
        for i, sep in enumerate(seps, start=1):
            if sep <= MIN_WAYPOINT_SEPARATION_M:
                raise PlanError(
                    f"waypoints {i - 1} and {i} are coincident "
                    f"(3D separation {sep:.3f} m <= {MIN_WAYPOINT_SEPARATION_M} m)"
                )

    @property
    def rtas(self) -> np.ndarray:
        return np.array([w.rta for w in self.waypoints])


@dataclass(frozen=True)
class LocalPlan:
    """Plan projected into the ENU frame anchored at the first waypoint.

    ``points`` is (N, 3) meters, ``times`` is (N,) seconds relative to the
    first waypoint's RTA.  The first point is exactly (0, 0, 0) at t = 0.
    """

    origin: GeoWaypoint
    points: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    plan_id: str = ""

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        ts = np.ascontiguousarray(np.asarray(self.times, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 3 or ts.shape != (pts.shape[0],):
            raise PlanError("local plan arrays have inconsistent shapes")
        if not np.all(np.diff(ts) > 0.0):
            raise PlanError("local plan times must be strictly increasing")
        pts.flags.writeable = False
        ts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "times", ts)

    @property
    def n_segments(self) -> int:
        return len(self.times) - 1

    def to_geodetic(self) -> np.ndarray:
        """Back-project all points to (lat, lon, alt) rows."""
        return enu_to_geodetic(self.points, self.origin)


# ---------------------------------------------------------------------------
# Coordinate conversions
# ---------------------------------------------------------------------------

def geodetic_to_ecef(lat_deg, lon_deg, alt_m):
    """WGS-84 geodetic (degrees, meters) -> ECEF (meters).

    Accepts scalars or arrays; returns an array shaped (..., 3).
    """
    lat = np.deg2rad(np.asarray(lat_deg, dtype=float))
    lon = np.deg2rad(np.asarray(lon_deg, dtype=float))
    alt = np.asarray(alt_m, dtype=float)

    sl, cl = np.sin(lat), np.cos(lat)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)  # prime vertical radius

    x = (n + alt) * cl * np.cos(lon)
    y = (n + alt) * cl * np.sin(lon)
    z = (n * (1.0 - WGS84_E2) + alt) * sl
    return np.stack([x, y, z], axis=-1)


def ecef_to_geodetic(ecef) -> np.ndarray:
    """ECEF (meters) -> WGS-84 geodetic (degrees, meters), shaped (..., 3).

    Bowring's closed-form followed by two fixed-point refinements of the
    latitude; sub-millimeter for altitudes within +-100 km of the ellipsoid.
    """
    ecef = np.asarray(ecef, dtype=float)
    x, y, z = ecef[..., 0], ecef[..., 1], ecef[..., 2]

    lon = np.arctan2(y, x)
    p = np.hypot(x, y)
    b = WGS84_A * (1.0 - WGS84_F)
    ep2 = (WGS84_A**2 - b**2) / b**2
    theta = np.arctan2(z * WGS84_A, p * b)
    lat = np.arctan2(
        z + ep2 * b * np.sin(theta) ** 3,
        p - WGS84_E2 * WGS84_A * np.cos(theta) ** 3,
    )
    for _ in range(2):
        sl = np.sin(lat)
        n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
        lat = np.arctan2(z + WGS84_E2 * n * sl, p)
    sl = np.sin(lat)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
    # Near the poles p/cos(lat) degenerates; use the z-form there.
    cos_lat = np.cos(lat)
    with np.errstate(divide="ignore", invalid="ignore"):
        alt_p = p / cos_lat - n
        alt_z = z / sl - n * (1.0 - WGS84_E2)
    alt = np.where(np.abs(cos_lat) > 1e-8, alt_p, alt_z)
    return np.stack([np.rad2deg(lat), np.rad2deg(lon), alt], axis=-1)


def _enu_rotation(origin: GeoWaypoint) -> np.ndarray:
    """Rows are the E, N, U unit vectors expressed in ECEF."""
    lat = np.deg2rad(origin.latitude)
    lon = np.deg2rad(origin.longitude)
    sl, cl = np.sin(lat), np.cos(lat)
    sb, cb = np.sin(lon), np.cos(lon)
    return np.array([
        [-sb, cb, 0.0],
        [-sl * cb, -sl * sb, cl],
        [cl * cb, cl * sb, sl],
    ])


def geodetic_to_enu(lat_deg, lon_deg, alt_m, origin: GeoWaypoint) -> np.ndarray:
    """Geodetic points -> ENU meters about ``origin``, shaped (..., 3)."""
    ecef = geodetic_to_ecef(lat_deg, lon_deg, alt_m)
    ecef0 = geodetic_to_ecef(origin.latitude, origin.longitude, origin.altitude)
    return (ecef - ecef0) @ _enu_rotation(origin).T


def enu_to_geodetic(enu, origin: GeoWaypoint) -> np.ndarray:
    """ENU meters about ``origin`` -> geodetic (lat, lon, alt) rows."""
    enu = np.asarray(enu, dtype=float)
    ecef0 = geodetic_to_ecef(origin.latitude, origin.longitude, origin.altitude)
    ecef = enu @ _enu_rotation(origin) + ecef0
    return ecef_to_geodetic(ecef)


def to_local_frame(plan: FlightPlan) -> LocalPlan:
    """Project a validated plan into the ENU frame of its first waypoint."""
    origin = plan.waypoints[0]
    lats = np.array([w.latitude for w in plan.waypoints])
    lons = np.array([w.longitude for w in plan.waypoints])
    alts = np.array([w.altitude for w in plan.waypoints])
    pts = geodetic_to_enu(lats, lons, alts, origin)
    pts[0] = 0.0  # origin is exact by definition
    ts = plan.rtas - plan.waypoints[0].rta
    return LocalPlan(origin=origin, points=pts, times=ts, plan_id=plan.plan_id)


# ---------------------------------------------------------------------------
# Plan file format
# ---------------------------------------------------------------------------
#
# YAML document:
#
#   plan_id: DEMO-1
#   altitude_reference: ellipsoid
#   waypoints:
#     - {lat: 39.7, lon: -104.9, alt: 1700.0, rta: 0.0}
#     - {lat: 39.8, lon: -104.9, alt: 1800.0, rta: 60.0}

_WAYPOINT_KEYS = ("lat", "lon", "alt", "rta")


def parse_flight_plan(text: str) -> FlightPlan:
    """Parse and validate a plan document; raises PlanError with the
    offending waypoint index on any violation."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise PlanError(f"malformed plan document: {exc}") from exc
    if not isinstance(doc, dict):
        raise PlanError("plan document must be a mapping")

    missing = [k for k in ("plan_id", "altitude_reference", "waypoints") if k not in doc]
    if missing:
        raise PlanError(f"plan document missing keys: {', '.join(missing)}")
    if doc["altitude_reference"] not in ALTITUDE_REFERENCES:
        raise PlanError(
            f"unknown altitude reference {doc['altitude_reference']!r}; "
            f"accepted: {', '.join(ALTITUDE_REFERENCES)}"
        )
    raw_wps = doc["waypoints"]
    if not isinstance(raw_wps, list) or len(raw_wps) < 2:
        raise PlanError("plan document needs a list of at least 2 waypoints")

    waypoints = []
    for i, row in enumerate(raw_wps):
        if not isinstance(row, dict) or any(k not in row for k in _WAYPOINT_KEYS):
            raise PlanError(f"waypoint at index {i} must carry keys {_WAYPOINT_KEYS}")
        try:
            wp = GeoWaypoint(
                latitude=float(row["lat"]),
                longitude=float(row["lon"]),
                altitude=float(row["alt"]),
                rta=float(row["rta"]),
            )
        except (TypeError, ValueError) as exc:
            raise PlanError(f"non-numeric waypoint field at index {i}: {exc}") from exc
        wp.validate(i)
        waypoints.append(wp)
    return FlightPlan(plan_id=str(doc["plan_id"]), waypoints=tuple(waypoints))


def serialize_flight_plan(plan: FlightPlan) -> str:
    """Canonical YAML serialization; parse(serialize(plan)) == plan."""
    doc = {
        "plan_id": plan.plan_id,
        "altitude_reference": "ellipsoid",
        "waypoints": [
            {"lat": float(w.latitude), "lon": float(w.longitude),
             "alt": float(w.altitude), "rta": float(w.rta)}
            for w in plan.waypoints
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def load_flight_plan(path) -> FlightPlan:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_flight_plan(fh.read())
