"""Uncertainty propagation along 4D flight plans.

Pipeline: geodetic plan -> local ENU frame -> shape-preserving Hermite
trajectory -> Kalman filter with sigmoid-blended measurement noise ->
per-waypoint arrival-time variances and confidence bounds, with baseline
models (constant-growth window, gated filter, Monte Carlo) and a tuning
pipeline that estimates the measurement-noise ceiling from ADS-B tracks.
"""

__version__ = "0.1.0"

from .geo import (
    FlightPlan,
    GeoWaypoint,
    LocalPlan,
    load_flight_plan,
    parse_flight_plan,
    serialize_flight_plan,
    to_local_frame,
)
from .kalman import (
    FilterConfig,
    FilterState,
    SegmentTrace,
    propagate_plan,
    propagate_segment,
    waypoint_velocity_variances,
)
from .rta import RtaEstimate, estimate_rta, rta_bounds
from .spline import TrajectorySpline, fit_trajectory
from .baseline import McConfig, UlpaConfig, gated_kf, monte_carlo_oracle, ulpa_bounds
from .tuning import AdsbTrack, TuningResult, parse_adsb, run_tuning

__all__ = [
    "__version__",
    "AdsbTrack",
    "FilterConfig",
    "FilterState",
    "FlightPlan",
    "GeoWaypoint",
    "LocalPlan",
    "McConfig",
    "RtaEstimate",
    "SegmentTrace",
    "TrajectorySpline",
    "TuningResult",
    "UlpaConfig",
    "estimate_rta",
    "fit_trajectory",
    "gated_kf",
    "load_flight_plan",
    "monte_carlo_oracle",
    "parse_adsb",
    "parse_flight_plan",
    "propagate_plan",
    "propagate_segment",
    "rta_bounds",
    "run_tuning",
    "serialize_flight_plan",
    "to_local_frame",
    "ulpa_bounds",
    "waypoint_velocity_variances",
]
