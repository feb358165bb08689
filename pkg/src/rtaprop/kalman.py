"""Linear Kalman filter with progress-blended measurement noise.

The filter models an FMS-equipped aircraft flying a 4D plan: a constant
velocity state [x y z vx vy vz] driven by the plan's spline velocity as
control input, with the planned position fed back as the measurement that
corrects drift.  How much that correction is trusted varies with progress
toward the next waypoint: a sigmoid blends the measurement noise between a
"no correction" ceiling Q_max and a "full correction" floor Q_min, so FMS
behavior emerges from the gain instead of a hard threshold.

NAMING NOTE: throughout this package Q denotes the MEASUREMENT noise
covariance (bounded by q_min_scale/q_max_scale) and R the PROCESS noise
covariance (white-noise acceleration scaled by sigma_a2).  This is the
reverse of the most common textbook lettering; configuration keys and CSV
columns follow the package convention consistently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericalError
from .geo import LocalPlan
from .spline import TrajectorySpline

# Progress fraction at which the gated baseline variant switches its
# measurement update on (also the uLPA activation point).
GATED_ACTIVATION = 2.0 / 3.0


@dataclass(frozen=True)
class FilterConfig:
    """Filter tuning knobs.

    dt:           propagation stride [s]
    sigma_a2:     acceleration noise variance [m^2/s^4] scaling R
    q_max_scale:  measurement-noise diagonal with no FMS correction
    q_min_scale:  measurement-noise diagonal with full FMS correction
    k_gain:       sigmoid steepness (0 disables blending -> constant 0.5)
    lpa:          sigmoid activation threshold, progress in [0, 1)
    progress_mode: 'time' (elapsed/duration) or 'distance' (along-chord)
    """

    dt: float = 1.0
    sigma_a2: float = 1.0
    q_max_scale: float = 1.0e8
    q_min_scale: float = 1.0
    k_gain: float = 10.0
    lpa: float = 0.0
    progress_mode: str = "time"

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.sigma_a2 < 0.0:
            raise ConfigError("sigma_a2 must be non-negative")
        if not self.q_max_scale >= self.q_min_scale > 0.0:
            raise ConfigError("need q_max_scale >= q_min_scale > 0")
        if not 0.0 <= self.lpa < 1.0:
            raise ConfigError("lpa must lie in [0, 1)")
        if self.progress_mode not in ("time", "distance"):
            raise ConfigError(f"unknown progress_mode {self.progress_mode!r}")


@dataclass(frozen=True)
class FilterState:
    """Filter mean and covariance at time t."""

    mean: np.ndarray = field(repr=False)       # (6,)
    covariance: np.ndarray = field(repr=False)  # (6,6) symmetric PSD
    t: float = 0.0

    def __post_init__(self):
        mean = np.ascontiguousarray(np.asarray(self.mean, dtype=float))
        cov = np.ascontiguousarray(np.asarray(self.covariance, dtype=float))
        if mean.shape != (6,) or cov.shape != (6, 6):
            raise ValueError("state is a 6-vector with a 6x6 covariance")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    def position(self) -> np.ndarray:
        return self.mean[0:3]

    def velocity_variances(self) -> np.ndarray:
        return np.diag(self.covariance)[3:6].copy()


@dataclass(frozen=True)
class SegmentTrace:
    """Per-step filter history across one plan segment.

    Row 0 is the segment entry; row j is the state after step j.  The
    blend columns (progress, sigma_blend, q_scale) are evaluated at each
    row's time: the step leaving row j uses row j's values.  For gated
    runs sigma_blend is NaN and q_scale is NaN on steps with no update.
    """

    segment_index: int
    times: np.ndarray = field(repr=False)        # (S+1,)
    means: np.ndarray = field(repr=False)        # (S+1, 6)
    covariances: np.ndarray = field(repr=False)  # (S+1, 6, 6)
    progress: np.ndarray = field(repr=False)     # (S+1,)
    sigma_blend: np.ndarray = field(repr=False)  # (S+1,)
    q_scale: np.ndarray = field(repr=False)      # (S+1,)
    warnings: tuple[str, ...] = ()

    @property
    def entry_state(self) -> FilterState:
        return FilterState(self.means[0], self.covariances[0], float(self.times[0]))

    @property
    def exit_state(self) -> FilterState:
        return FilterState(self.means[-1], self.covariances[-1], float(self.times[-1]))

    @property
    def waypoint_covariance(self) -> np.ndarray:
        """Covariance snapshot at passage of the segment's end waypoint."""
        return self.covariances[-1]

    def position_std(self) -> np.ndarray:
        """Per-row RMS position standard deviation (the uncertainty curve)."""
        diag = np.einsum("sii->si", self.covariances)[:, 0:3]
        return np.sqrt(np.maximum(diag, 0.0).sum(axis=1))


# ---------------------------------------------------------------------------
# Model matrices
# ---------------------------------------------------------------------------

def transition_matrix(dt: float) -> np.ndarray:
    """Constant-velocity state transition: position += dt * velocity."""
    if dt < 0.0:
        raise ConfigError("dt must be non-negative")
    a = np.eye(6)
    a[0, 3] = a[1, 4] = a[2, 5] = dt
    return a


def control_matrix(dt: float) -> np.ndarray:
    """Control input matrix: velocity command moves position only."""
    b = np.zeros((6, 3))
    b[0, 0] = b[1, 1] = b[2, 2] = dt
    return b


def process_noise(dt: float, sigma_a2: float) -> np.ndarray:
    """White-noise-acceleration process covariance R (see naming note above).

    Per axis: [[dt^4/4, dt^3/2], [dt^3/2, dt^2]] * sigma_a2.
    """
    if sigma_a2 < 0.0:
        raise ConfigError("sigma_a2 must be non-negative")
    r = np.zeros((6, 6))
    for a in range(3):
        r[a, a] = 0.25 * dt**4
        r[a + 3, a + 3] = dt**2
        r[a, a + 3] = r[a + 3, a] = 0.5 * dt**3
    return sigma_a2 * r


def measurement_matrix() -> np.ndarray:
    """C selects position from the state."""
    c = np.zeros((3, 6))
    c[0, 0] = c[1, 1] = c[2, 2] = 1.0
    return c


def sigmoid_blend(p, k_gain: float, lpa: float):
    """Blend factor sigma = 1 / (1 + exp(k * (p - lpa))).

    Monotone decreasing in progress for k_gain > 0; equals 0.5 at p = lpa.
    The exponent is clipped to keep exp() finite for extreme gains.
    """
    x = np.clip(np.asarray(p, dtype=float) * k_gain - k_gain * lpa, -700.0, 700.0)
    out = 1.0 / (1.0 + np.exp(x))
    return float(out) if out.ndim == 0 else out


def measurement_noise(p, cfg: FilterConfig) -> np.ndarray:
    """Blended measurement covariance Q = Q_min + (Q_max - Q_min) * sigma."""
    sigma = sigmoid_blend(p, cfg.k_gain, cfg.lpa)
    return measurement_noise_scale(sigma, cfg) * np.eye(3)


def measurement_noise_scale(sigma, cfg: FilterConfig):
    return cfg.q_min_scale + (cfg.q_max_scale - cfg.q_min_scale) * sigma


# ---------------------------------------------------------------------------
# Single-step operations (reference path; the fused kernel matches these)
# ---------------------------------------------------------------------------

def predict(state: FilterState, u, cfg: FilterConfig, dt: float | None = None) -> FilterState:
    """One prediction step driven by commanded velocity u."""
    dt = cfg.dt if dt is None else dt
    a = transition_matrix(dt)
    b = control_matrix(dt)
    mean = a @ state.mean + b @ np.asarray(u, dtype=float)
    cov = a @ state.covariance @ a.T + process_noise(dt, cfg.sigma_a2)
    return FilterState(mean, 0.5 * (cov + cov.T), state.t + dt)


def update(state: FilterState, z, q_matrix) -> FilterState:
    """Measurement update against planned position z, Joseph form."""
    q_matrix = np.asarray(q_matrix, dtype=float)
    c = measurement_matrix()
    s_mat = c @ state.covariance @ c.T + q_matrix
    try:
        gain = np.linalg.solve(s_mat, c @ state.covariance).T  # (6,3)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular innovation covariance: {exc}") from exc
    innov = np.asarray(z, dtype=float) - state.mean[0:3]
    mean = state.mean + gain @ innov
    ikc = np.eye(6) - gain @ c
    cov = ikc @ state.covariance @ ikc.T + gain @ q_matrix @ gain.T
    return FilterState(mean, 0.5 * (cov + cov.T), state.t)


# ---------------------------------------------------------------------------
# Plan-level propagation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """Flattened per-step inputs for a whole plan (feeds the kernels).

    ``times`` has one entry per step boundary (S+1); everything else is
    per step (S).  ``step_p``/``step_sigma``/``step_qscale`` are evaluated
    at each step's start within the step's own segment; a knot row shared
    by two segments therefore contributes p = 0 of the new segment to the
    step leaving it.
    """

    times: np.ndarray
    dts: np.ndarray
    us: np.ndarray
    zs: np.ndarray
    step_p: np.ndarray
    step_sigma: np.ndarray
    step_qscale: np.ndarray
    mask: np.ndarray
    step_segment: np.ndarray
    seg_bounds: np.ndarray      # (n_segments+1,) boundary-row index of each knot
    gated: bool = False
    activation: float = GATED_ACTIVATION
    warnings: tuple[str, ...] = ()

    @property
    def n_steps(self) -> int:
        return len(self.dts)


def _segment_steps(t0: float, t1: float, dt: float):
    """Step durations covering [t0, t1]: full strides plus a partial tail."""
    duration = t1 - t0
    n_full = int(math.floor(duration / dt + 1e-9))
    tail = duration - n_full * dt
    if n_full == 0:
        return [duration]
    if tail > 1e-9 * max(1.0, duration):
        return [dt] * n_full + [tail]
    return [dt] * n_full


def build_schedule(
    spline: TrajectorySpline,
    plan: LocalPlan,
    cfg: FilterConfig,
    gated: bool = False,
    activation: float = GATED_ACTIVATION,
) -> StepSchedule:
    """Precompute per-step control, measurement, and noise inputs.

    For the blended filter every step updates with the sigmoid-blended Q.
    For the gated variant steps with progress < activation skip the update
    and later steps use Q_min.
    """
    knot_t = plan.times
    warnings: list[str] = []

    times = [float(knot_t[0])]
    dts: list[float] = []
    step_p: list[float] = []
    step_segment: list[int] = []
    seg_bounds = [0]

    for k in range(plan.n_segments):
        t0, t1 = float(knot_t[k]), float(knot_t[k + 1])
        seg_dts = _segment_steps(t0, t1, cfg.dt)
        if len(seg_dts) == 1 and seg_dts[0] < cfg.dt - 1e-12:
            warnings.append(
                f"segment {k}: duration {t1 - t0:.3f} s shorter than dt "
                f"{cfg.dt} s; single-step fallback"
            )
        t = t0
        for sd in seg_dts:
            dts.append(sd)
            step_segment.append(k)
            step_p.append((t - t0) / (t1 - t0))
            t = min(t + sd, t1)
            times.append(t)
        times[-1] = t1
        seg_bounds.append(len(times) - 1)

    times_arr = np.asarray(times)
    dts_arr = np.asarray(dts)
    step_p_arr = np.asarray(step_p)
    step_segment_arr = np.asarray(step_segment, dtype=np.int64)

    us = spline.velocity_at(times_arr[:-1])
    zs = spline.position_at(times_arr[1:])

    if cfg.progress_mode == "distance":
        step_p_arr = _distance_progress(spline, plan, times_arr[:-1], step_segment_arr)

    if gated:
        mask = (step_p_arr >= activation - 1e-12).astype(np.uint8)
        step_sigma = np.full_like(step_p_arr, np.nan)
        step_qscale = np.where(mask.astype(bool), cfg.q_min_scale, np.nan)
    else:
        mask = np.ones(len(dts_arr), dtype=np.uint8)
        step_sigma = np.asarray(sigmoid_blend(step_p_arr, cfg.k_gain, cfg.lpa), dtype=float)
        step_qscale = measurement_noise_scale(step_sigma, cfg)

    return StepSchedule(
        times=times_arr,
        dts=dts_arr,
        us=np.ascontiguousarray(us),
        zs=np.ascontiguousarray(zs),
        step_p=step_p_arr,
        step_sigma=step_sigma,
        step_qscale=np.asarray(step_qscale, dtype=float),
        mask=mask,
        step_segment=step_segment_arr,
        seg_bounds=np.asarray(seg_bounds, dtype=np.int64),
        gated=gated,
        activation=activation,
        warnings=tuple(warnings),
    )


def _distance_progress(spline, plan, step_starts, step_segment) -> np.ndarray:
    """Along-chord progress: projection of position onto the segment chord."""
    pos = spline.position_at(step_starts)
    chords = np.diff(plan.points, axis=0)
    denom = np.einsum("kd,kd->k", chords, chords)
    rel = pos - plan.points[step_segment]
    s = np.einsum("sd,sd->s", rel, chords[step_segment]) / denom[step_segment]
    return np.clip(s, 0.0, 1.0)


def _run_schedule(entry: FilterState, sched: StepSchedule, cfg: FilterConfig):
    qs = np.where(np.isnan(sched.step_qscale), 1.0, sched.step_qscale)
    try:
        means, covs, kp, kv = _kernels.filter_steps(
            np.ascontiguousarray(entry.mean),
            np.ascontiguousarray(entry.covariance),
            sched.dts,
            sched.us,
            sched.zs,
            np.ascontiguousarray(qs),
            sched.mask,
            cfg.sigma_a2,
        )
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"filter propagation failed: {exc}") from exc
    return means, covs, kp, kv


def _slice_traces(sched: StepSchedule, cfg: FilterConfig, means, covs) -> list[SegmentTrace]:
    traces = []
    for k in range(len(sched.seg_bounds) - 1):
        lo, hi = int(sched.seg_bounds[k]), int(sched.seg_bounds[k + 1])
        rows = slice(lo, hi + 1)
        t_rows = sched.times[rows]
        if cfg.progress_mode == "distance":
            # Step rows reuse the step progress; the closing knot row is 1.
            p_rows = np.append(sched.step_p[lo:hi], 1.0)
        else:
            p_rows = (t_rows - t_rows[0]) / (t_rows[-1] - t_rows[0])
        if sched.gated:
            sigma_rows = np.full_like(p_rows, np.nan)
            q_rows = np.where(p_rows >= sched.activation - 1e-12,
                              cfg.q_min_scale, np.nan)
        else:
            sigma_rows = np.asarray(
                sigmoid_blend(p_rows, cfg.k_gain, cfg.lpa), dtype=float)
            q_rows = measurement_noise_scale(sigma_rows, cfg)
        seg_warnings = tuple(w for w in sched.warnings if w.startswith(f"segment {k}:"))
        traces.append(SegmentTrace(
            segment_index=k,
            times=t_rows,
            means=means[rows],
            covariances=covs[rows],
            progress=p_rows,
            sigma_blend=sigma_rows,
            q_scale=np.asarray(q_rows, dtype=float),
            warnings=seg_warnings,
        ))
    return traces


def initial_state(plan: LocalPlan) -> FilterState:
    """Departure state: first waypoint position, zero velocity, zero
    covariance (the aircraft is at the known origin at epoch).

    The state velocity stays near zero throughout: motion enters through
    the control input, so a tracked velocity would double-count it.
    """
    mean = np.zeros(6)
    mean[0:3] = plan.points[0]
    return FilterState(mean, np.zeros((6, 6)), float(plan.times[0]))


def propagate_plan(
    spline: TrajectorySpline,
    plan: LocalPlan,
    cfg: FilterConfig,
    entry: FilterState | None = None,
    gated: bool = False,
    activation: float = GATED_ACTIVATION,
) -> list[SegmentTrace]:
    """Propagate the filter over every segment; each segment's entry state
    is the previous segment's exit state."""
    entry = initial_state(plan) if entry is None else entry
    sched = build_schedule(spline, plan, cfg, gated=gated, activation=activation)
    means, covs, _, _ = _run_schedule(entry, sched, cfg)
    return _slice_traces(sched, cfg, means, covs)


def propagate_segment(
    spline: TrajectorySpline,
    plan: LocalPlan,
    segment_index: int,
    entry: FilterState,
    cfg: FilterConfig,
) -> SegmentTrace:
    """Propagate one segment from its entry state (entry.t must equal the
    segment's start knot time)."""
    t0 = float(plan.times[segment_index])
    if abs(entry.t - t0) > 1e-9:
        raise ConfigError(
            f"entry state time {entry.t} does not match segment start {t0}"
        )
    sched = build_schedule(spline, plan, cfg)
    lo, hi = int(sched.seg_bounds[segment_index]), int(sched.seg_bounds[segment_index + 1])
    seg_warnings = tuple(
        w for w in sched.warnings if w.startswith(f"segment {segment_index}:"))
    sub = StepSchedule(
        times=sched.times[lo:hi + 1],
        dts=sched.dts[lo:hi],
        us=sched.us[lo:hi],
        zs=sched.zs[lo:hi],
        step_p=sched.step_p[lo:hi],
        step_sigma=sched.step_sigma[lo:hi],
        step_qscale=sched.step_qscale[lo:hi],
        mask=sched.mask[lo:hi],
        step_segment=sched.step_segment[lo:hi],
        seg_bounds=np.array([0, hi - lo], dtype=np.int64),
        gated=sched.gated,
        activation=sched.activation,
    )
    means, covs, _, _ = _run_schedule(entry, sub, cfg)
    trace = _slice_traces(sub, cfg, means, covs)[0]
    return replace(trace, segment_index=segment_index, warnings=seg_warnings)


def waypoint_velocity_variances(traces: list[SegmentTrace]) -> np.ndarray:
    """Velocity-block covariance diagonals at each waypoint passage, (K,3)."""
    return np.stack([
        np.diag(tr.waypoint_covariance)[3:6] for tr in traces
    ])
