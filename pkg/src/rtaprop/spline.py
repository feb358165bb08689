"""Monotone-in-time cubic Hermite trajectory interpolation.

Each axis of the local plan is fit independently against time with a
piecewise cubic Hermite interpolant whose knot slopes follow the
Fritsch-Carlson shape-preserving rule (weighted harmonic mean of adjacent
secants, zeroed at local extrema, with the three-point one-sided endpoint
formula).  The interpolant passes through every waypoint exactly, is C1
continuous, and never overshoots axis-monotone data.

Position feeds the filter's measurement path, velocity is the control
input, and acceleration is exposed for completeness (the filter ignores
it).  Second derivatives are piecewise linear and may jump at knots; by
convention evaluation at an interior knot takes the right-hand segment.
No extrapolation: evaluation outside [t0, tN] raises DomainError.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PlanError
from .geo import LocalPlan


def _fritsch_carlson_slopes(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Shape-preserving knot slopes for one axis.

    t: (N,) strictly increasing, y: (N,).  Returns (N,) slopes.
    """
    n = len(t)
    h = np.diff(t)
    delta = np.diff(y) / h
    if n == 2:
        return np.array([delta[0], delta[0]])

    m = np.zeros(n)
    # Interior knots: weighted harmonic mean where the secants agree in
    # sign, zero at local extrema or flats.
    for k in range(1, n - 1):
        d0, d1 = delta[k - 1], delta[k]
        if d0 * d1 > 0.0:
            w1 = 2.0 * h[k] + h[k - 1]
            w2 = h[k] + 2.0 * h[k - 1]
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1)
        # else: extremum or flat -> slope 0
    m[0] = _edge_slope(h[0], h[1], delta[0], delta[1])
    m[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2])
    return m


def _edge_slope(h0: float, h1: float, d0: float, d1: float) -> float:
    """One-sided three-point endpoint slope with monotonicity clamps."""
    m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if m * d0 <= 0.0:
        return 0.0
    if d0 * d1 < 0.0 and abs(m) > 3.0 * abs(d0):
        return 3.0 * d0
    return m


@dataclass(frozen=True)
class TrajectorySpline:
    """Per-axis cubic Hermite interpolant over time.

    knot_times: (N,) seconds, strictly increasing.
    values:     (N, 3) meters, the waypoint positions.
    slopes:     (N, 3) meters/second, Fritsch-Carlson knot slopes.
    """

    knot_times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("knot_times", "values", "slopes"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not np.all(np.diff(self.knot_times) > 0.0):
            raise PlanError("spline knot times must be strictly increasing")

    @property
    def t_start(self) -> float:
        return float(self.knot_times[0])

    @property
    def t_end(self) -> float:
        return float(self.knot_times[-1])

    def _locate(self, t) -> tuple[np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        if np.any(t < self.knot_times[0]) or np.any(t > self.knot_times[-1]):
            raise DomainError(
                f"time out of spline domain [{self.knot_times[0]}, {self.knot_times[-1]}]"
            )
        # Right-hand segment at interior knots; clamp so t_end uses the
        # final segment.
        idx = np.searchsorted(self.knot_times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.knot_times) - 2)
        return t, idx

    def _eval(self, t, order: int) -> np.ndarray:
        t, idx = self._locate(t)
        h = self.knot_times[idx + 1] - self.knot_times[idx]
        s = (t - self.knot_times[idx]) / h
        y0 = self.values[idx]
        y1 = self.values[idx + 1]
        m0 = self.slopes[idx]
        m1 = self.slopes[idx + 1]

        s = s[..., None]
        h = h[..., None]
        if order == 0:
            h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
            h10 = s * (1.0 - s) ** 2
            h01 = s * s * (3.0 - 2.0 * s)
            h11 = s * s * (s - 1.0)
            return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
        if order == 1:
            d00 = 6.0 * s * (s - 1.0) / h
            d10 = (3.0 * s * s - 4.0 * s + 1.0)
            d01 = -6.0 * s * (s - 1.0) / h
            d11 = (3.0 * s * s - 2.0 * s)
            return d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1
        if order == 2:
            e00 = (12.0 * s - 6.0) / (h * h)
            e10 = (6.0 * s - 4.0) / h
            e01 = (6.0 - 12.0 * s) / (h * h)
            e11 = (6.0 * s - 2.0) / h
            return e00 * y0 + e10 * m0 + e01 * y1 + e11 * m1
        raise ValueError(f"unsupported derivative order {order}")

    def position_at(self, t) -> np.ndarray:
        """Position [m] at time t; t may be a scalar or array."""
        return self._eval(t, 0)

    def velocity_at(self, t) -> np.ndarray:
        """Velocity [m/s] at time t (first derivative per axis)."""
        return self._eval(t, 1)

    def acceleration_at(self, t) -> np.ndarray:
        """Acceleration [m/s^2] at time t; right-segment value at knots."""
        return self._eval(t, 2)


def fit_trajectory(plan: LocalPlan) -> TrajectorySpline:
    """Fit the per-axis shape-preserving Hermite interpolant to a plan."""
    t = plan.times
    pts = plan.points
    slopes = np.column_stack([_fritsch_carlson_slopes(t, pts[:, a]) for a in range(3)])
    return TrajectorySpline(knot_times=t, values=pts, slopes=slopes)


def sample_trajectory(spline: TrajectorySpline, stride: float) -> np.ndarray:
    """Sample (t, x, y, z, vx, vy, vz, ax, ay, az) rows at a fixed stride.

    The final knot time is always included.  Intended for debug dumps and
    plotting.
    """
    if stride <= 0.0:
        raise ValueError("stride must be positive")
    t = np.arange(spline.t_start, spline.t_end, stride)
    if len(t) == 0 or t[-1] < spline.t_end:
        t = np.append(t, spline.t_end)
    return np.column_stack([
        t,
        spline.position_at(t),
        spline.velocity_at(t),
        spline.acceleration_at(t),
    ])
