"""Arrival-time variance extraction and confidence bounds.

Propagated velocity variances are converted into per-segment arrival-time
variances through the segment's cruise kinematics, accumulated along the
route, and turned into symmetric confidence bounds about each waypoint's
nominal RTA under a normal arrival-time model.

A segment contributes ``delta_t * ||sigma2_v|| / ||v||`` seconds-squared,
but only while the velocity-noise-to-speed ratio stays below the
``delta * v_bar0`` threshold; segments at or above the threshold
contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import ConfigError
from .geo import LocalPlan


@dataclass(frozen=True)
class SegmentKinematics:
    """Constant-cruise description of one segment."""

    delta_p: np.ndarray   # (3,) meters
    delta_t: float        # seconds
    v: np.ndarray         # (3,) m/s, delta_p / delta_t

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))


@dataclass(frozen=True)
class RtaEstimate:
    """Arrival-time distribution summary for one waypoint."""

    waypoint_index: int
    nominal_rta: float
    time_variance: float
    lower: float
    upper: float
    confidence: float


def segment_kinematics(plan: LocalPlan, k: int) -> SegmentKinematics:
    """Kinematics of the segment ending at waypoint k (1 <= k < N)."""
    if not 1 <= k < len(plan.times):
        raise IndexError(f"segment index {k} out of range")
    delta_p = plan.points[k] - plan.points[k - 1]
    delta_t = float(plan.times[k] - plan.times[k - 1])
    return SegmentKinematics(delta_p=delta_p, delta_t=delta_t, v=delta_p / delta_t)


def segment_time_variance(
    kin: SegmentKinematics,
    sigma2_v,
    delta: float = 1.0,
    v_bar0: float | None = None,
) -> float:
    """Arrival-time variance contributed by one segment [s^2].

    sigma2_v: (3,) velocity variances at the waypoint passage [m^2/s^2].
    Returns 0 when ||sigma2_v|| / ||v|| >= delta * v_bar0 (noise past the
    threshold is treated as not influencing the time variance).
    """
    sigma2_v = np.asarray(sigma2_v, dtype=float)
    if np.any(sigma2_v < 0.0):
        raise ConfigError("velocity variances must be non-negative")
    if delta <= 0.0:
        raise ConfigError("delta must be positive")
    v_bar0 = kin.speed if v_bar0 is None else v_bar0
    if v_bar0 <= 0.0:
        raise ConfigError("v_bar0 must be positive")
    ratio = float(np.linalg.norm(sigma2_v)) / kin.speed
    if ratio < delta * v_bar0:
        return kin.delta_t * ratio
    return 0.0


def cumulative_variance(per_segment) -> np.ndarray:
    """Cumulative sum of per-segment variances: waypoint k accumulates
    segments 1..k."""
    return np.cumsum(np.asarray(per_segment, dtype=float))


def normal_quantile(confidence: float) -> float:
    """Two-sided standard-normal quantile for a central coverage level."""
    if not 0.0 < confidence < 1.0:
        raise ConfigError("confidence must lie in (0, 1)")
    return NormalDist().inv_cdf(0.5 * (1.0 + confidence))


def rta_bounds(nominal: float, variance: float, confidence: float) -> tuple[float, float]:
    """Symmetric confidence bounds nominal -+ z * sqrt(variance)."""
    if variance < 0.0:
        raise ConfigError("variance must be non-negative")
    offset = normal_quantile(confidence) * np.sqrt(variance)
    return nominal - offset, nominal + offset


def mean_cruise_speed(plan: LocalPlan) -> float:
    """Mean of per-segment cruise speeds; the default v_bar0."""
    speeds = [segment_kinematics(plan, k).speed for k in range(1, len(plan.times))]
    return float(np.mean(speeds))


def estimate_rta(
    plan: LocalPlan,
    velocity_variances,
    rta_offset: float = 0.0,
    confidence: float = 0.95,
    delta: float = 1.0,
    v_bar0: float | None = None,
) -> list[RtaEstimate]:
    """Full pipeline: per-segment variances -> cumulative -> bounds.

    velocity_variances: (N-1, 3) velocity-block covariance diagonals at each
    waypoint passage (from the filter traces).  rta_offset shifts the local
    plan times back to absolute RTAs (the first waypoint's RTA).

    The first waypoint is reported with zero variance; bounds widen along
    the route as segment contributions accumulate.
    """
    velocity_variances = np.asarray(velocity_variances, dtype=float)
    n_seg = plan.n_segments
    if velocity_variances.shape != (n_seg, 3):
        raise ConfigError(
            f"expected ({n_seg}, 3) velocity variances, got {velocity_variances.shape}"
        )
    v_bar0 = mean_cruise_speed(plan) if v_bar0 is None else v_bar0

    per_segment = [
        segment_time_variance(
            segment_kinematics(plan, k), velocity_variances[k - 1], delta, v_bar0)
        for k in range(1, n_seg + 1)
    ]
    cum = cumulative_variance(per_segment)

    estimates = [RtaEstimate(0, rta_offset + float(plan.times[0]), 0.0,
                             rta_offset + float(plan.times[0]),
                             rta_offset + float(plan.times[0]), confidence)]
    for k in range(1, n_seg + 1):
        nominal = rta_offset + float(plan.times[k])
        lo, hi = rta_bounds(nominal, float(cum[k - 1]), confidence)
        estimates.append(RtaEstimate(k, nominal, float(cum[k - 1]), lo, hi, confidence))
    return estimates
