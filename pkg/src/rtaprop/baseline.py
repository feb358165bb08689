"""Reference models the blended filter is judged against.

Three baselines live here:

* the constant-growth arrival-window model (envelope diverges at a fixed
  rate until an activation fraction of each segment, then converges to a
  terminal tolerance at the waypoint);
* the gated filter variant (no measurement update before the activation
  fraction, full-trust update after), which shows the abrupt variance
  collapse the sigmoid blend removes;
* an exact Monte Carlo simulation of the linear-Gaussian closed-loop
  system the filter models.  Its empirical covariance converges to the
  filter covariance, making it the ground truth for consistency checks,
  and its trajectory samples yield per-waypoint arrival-time samples via
  first crossing of the plane perpendicular to the segment at the
  waypoint.

Randomness uses the counter-based Philox generator with per-sample keys
derived from (seed, sample index), so results reproduce bitwise across
runs and platforms, and block reductions use compensated summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError
from .geo import LocalPlan
from .kalman import (
    GATED_ACTIVATION,
    FilterConfig,
    FilterState,
    SegmentTrace,
    StepSchedule,
    build_schedule,
    initial_state,
    propagate_plan,
    _run_schedule,
)
from .spline import TrajectorySpline


@dataclass(frozen=True)
class UlpaConfig:
    """Constant-growth arrival-window model parameters.

    growth_rate:         envelope divergence rate [s of window per s flown]
    activation_fraction: progress fraction where convergence begins
    rta_tolerance:       terminal half-width enforced at each waypoint [s]
    """

    growth_rate: float = 1.06
    activation_fraction: float = GATED_ACTIVATION
    rta_tolerance: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.activation_fraction < 1.0:
            raise ConfigError("activation_fraction must lie in (0, 1)")
        if self.rta_tolerance < 0.0:
            raise ConfigError("rta_tolerance must be non-negative")
        if self.growth_rate < 0.0:
            raise ConfigError("growth_rate must be non-negative")


@dataclass(frozen=True)
class UlpaEnvelope:
    """Piecewise-linear arrival-window half-widths along the plan.

    breakpoints: (M, 2) rows of (t [s], half_width [s]); one interior
    breakpoint per segment at the activation fraction.
    waypoint_bounds: (N-1, 2) rows of (lower, upper) RTA seconds for each
    arrival waypoint.
    """

    breakpoints: np.ndarray = field(repr=False)
    waypoint_bounds: np.ndarray = field(repr=False)

    def half_width_at(self, t) -> np.ndarray:
        return np.interp(t, self.breakpoints[:, 0], self.breakpoints[:, 1])


def ulpa_bounds(plan: LocalPlan, cfg: UlpaConfig = UlpaConfig()) -> UlpaEnvelope:
    """Arrival-window envelope under the constant-growth model.

    Each segment starts at the previous waypoint's enforced half-width
    (zero at departure), diverges at growth_rate until the activation
    fraction of the segment duration, then converges linearly so the
    waypoint is met within rta_tolerance.
    """
    bp_t = [float(plan.times[0])]
    bp_w = [0.0]
    wp_bounds = []
    for k in range(plan.n_segments):
        t0, t1 = float(plan.times[k]), float(plan.times[k + 1])
        duration = t1 - t0
        t_peak = t0 + cfg.activation_fraction * duration
        w_start = bp_w[-1]
        w_peak = w_start + cfg.growth_rate * (t_peak - t0)
        bp_t.extend([t_peak, t1])
        bp_w.extend([w_peak, cfg.rta_tolerance])
        rta = t1
        wp_bounds.append((rta - cfg.rta_tolerance, rta + cfg.rta_tolerance))
    return UlpaEnvelope(
        breakpoints=np.column_stack([bp_t, bp_w]),
        waypoint_bounds=np.asarray(wp_bounds),
    )


def gated_kf(
    spline: TrajectorySpline,
    plan: LocalPlan,
    cfg: FilterConfig,
    activation: float = GATED_ACTIVATION,
) -> list[SegmentTrace]:
    """Filter variant with a hard update gate instead of the blend.

    The measurement update is skipped entirely while segment progress is
    below ``activation`` and applied with Q = Q_min afterwards, producing
    the abrupt single-step variance drop at the gate.
    """
    return propagate_plan(spline, plan, cfg, gated=True, activation=activation)


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McConfig:
    """Monte Carlo run parameters."""

    samples: int = 10_000
    seed: int = 0
    block: int = 128

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.block < 1:
            raise ConfigError("block must be >= 1")


@dataclass(frozen=True)
class McResult:
    """Empirical moments and arrival-time samples from the oracle.

    times:       (S+1,) step-boundary times
    mean:        (S+1, 6) empirical state means
    covariance:  (S+1, 6, 6) empirical covariances (unbiased)
    arrivals:    (samples, W) arrival-time samples per arrival waypoint;
                 NaN where a sample never crossed the waypoint plane
    """

    times: np.ndarray = field(repr=False)
    mean: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    arrivals: np.ndarray = field(repr=False)
    samples: int = 0
    seed: int = 0

    def arrival_std(self) -> np.ndarray:
        """Per-waypoint arrival-time standard deviation (NaN-aware)."""
        return np.asarray(np.nanstd(self.arrivals, axis=0, ddof=1))


def _philox_key(seed: int, index: int) -> np.ndarray:
    return np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(index)],
                    dtype=np.uint64)


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Matrix square root tolerant of singular (even zero) covariances."""
    if not np.any(cov):
        return np.zeros_like(cov)
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def _kahan_add(total: np.ndarray, comp: np.ndarray, value: np.ndarray) -> None:
    y = value - comp
    t = total + y
    comp[...] = (t - total) - y
    total[...] = t


def _sample_noise(seed: int, sample_index: int, n_steps: int):
    """Per-sample substream: 6 entry draws, then 6 draws per step."""
    gen = np.random.Generator(np.random.Philox(key=_philox_key(seed, sample_index)))
    vals = gen.standard_normal(6 + 6 * n_steps)
    entry = vals[:6]
    na = vals[6:6 + 3 * n_steps].reshape(n_steps, 3)
    nv = vals[6 + 3 * n_steps:].reshape(n_steps, 3)
    return entry, na, nv


def _first_crossings(
    positions: np.ndarray,
    times: np.ndarray,
    origin: np.ndarray,
    direction: np.ndarray,
    j0: int,
    chunk: int = 128,
) -> np.ndarray:
    """First time each track's along-``direction`` coordinate (relative to
    ``origin``) becomes non-negative, scanning from boundary ``j0``.

    Scans in chunks and stops once every track has crossed, so the cost is
    proportional to how far past the plane the laggards run, not to the
    track length.  Tracks that never cross are extrapolated at their final
    approach rate (NaN if receding).
    """
    n_tracks = positions.shape[0]
    out = np.full(n_tracks, np.nan)
    done = np.zeros(n_tracks, dtype=bool)

    prev_s = (positions[:, j0, :] - origin) @ direction
    prev_t = times[j0]
    # Already at/past the plane at the window start: clamp there.
    lead = prev_s >= 0.0
    out[lead] = prev_t
    done |= lead

    last = positions.shape[1] - 1
    if last == 0:
        return out
    j = j0
    while j < last and not done.all():
        hi = min(j + chunk, last)
        s_chunk = (positions[:, j + 1:hi + 1, :] - origin) @ direction  # (B, c)
        full = np.concatenate([prev_s[:, None], s_chunk], axis=1)
        crossed = full >= 0.0
        hit = crossed.any(axis=1) & ~done
        if np.any(hit):
            first = np.argmax(crossed[hit], axis=1)  # >= 1 (col 0 is prev)
            t_win = times[j:hi + 1]
            s0 = full[hit, first - 1]
            s1 = full[hit, first]
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(s1 > s0, -s0 / (s1 - s0), 0.0)
            out[hit] = t_win[first - 1] + frac * (t_win[first] - t_win[first - 1])
            done |= hit
        prev_s = full[:, -1]
        prev_t = times[hi]
        j = hi

    if not done.all():
        rem = ~done
        s_last = (positions[rem, last, :] - origin) @ direction
        s_before = (positions[rem, last - 1, :] - origin) @ direction
        dt_last = times[last] - times[last - 1]
        rate = (s_last - s_before) / dt_last
        with np.errstate(divide="ignore", invalid="ignore"):
            out[rem] = np.where(rate > 0.0, times[last] - s_last / rate, np.nan)
    return out


def arrival_times_from_tracks(
    positions: np.ndarray,
    times: np.ndarray,
    plan: LocalPlan,
    seg_bounds: np.ndarray,
) -> np.ndarray:
    """First-crossing arrival times for a batch of position tracks.

    positions: (B, S+1, 3); times: (S+1,).  For arrival waypoint k the
    crossing plane is perpendicular to segment k's chord at the waypoint;
    detection starts at the segment's first step boundary.  Samples still
    short of the plane at the end of the track are extrapolated at their
    final approach rate (NaN if not approaching).
    """
    n_tracks = positions.shape[0]
    n_wp = plan.n_segments
    arrivals = np.full((n_tracks, n_wp), np.nan)
    for k in range(n_wp):
        chord = plan.points[k + 1] - plan.points[k]
        direction = chord / np.linalg.norm(chord)
        arrivals[:, k] = _first_crossings(
            positions, times, plan.points[k + 1], direction, int(seg_bounds[k]))
    return arrivals


def monte_carlo_oracle(
    spline: TrajectorySpline,
    plan: LocalPlan,
    cfg: FilterConfig,
    mc: McConfig = McConfig(),
    entry: FilterState | None = None,
    gated: bool = False,
) -> McResult:
    """Simulate the exact closed-loop linear-Gaussian system.

    Per sample: process noise drawn from R(dt, sigma_a2), perceived
    position noise from the step's measurement covariance, corrections
    applied through the same gain schedule the filter computes.  The
    ensemble covariance about the sample mean follows the filter
    covariance exactly (up to sampling error).
    """
    entry = initial_state(plan) if entry is None else entry
    sched = build_schedule(spline, plan, cfg, gated=gated)
    _, _, kp, kv = _run_schedule(entry, sched, cfg)

    n_steps = sched.n_steps
    sqrt_q = np.sqrt(np.where(sched.mask.astype(bool),
                              np.where(np.isnan(sched.step_qscale), 1.0,
                                       sched.step_qscale),
                              1.0))
    sigma_a = math.sqrt(cfg.sigma_a2)
    entry_sqrt = _psd_sqrt(entry.covariance)

    sum1 = np.zeros((n_steps + 1, 6))
    comp1 = np.zeros_like(sum1)
    sum2 = np.zeros((n_steps + 1, 6, 6))
    comp2 = np.zeros_like(sum2)
    arrivals = np.empty((mc.samples, plan.n_segments))

    for start in range(0, mc.samples, mc.block):
        stop = min(start + mc.block, mc.samples)
        n_blk = stop - start
        x0 = np.empty((n_blk, 6))
        na = np.empty((n_blk, n_steps, 3))
        nv = np.empty((n_blk, n_steps, 3))
        for b in range(n_blk):
            entry_draw, na[b], nv[b] = _sample_noise(mc.seed, start + b, n_steps)
            x0[b] = entry.mean + entry_sqrt @ entry_draw

        states = _kernels.mc_rollout_block(
            x0, na, nv, sched.dts, sched.us, sched.zs,
            np.ascontiguousarray(kp), np.ascontiguousarray(kv),
            sched.mask, sigma_a, sqrt_q,
        )
        _kahan_add(sum1, comp1, states.sum(axis=0))
        _kahan_add(sum2, comp2, np.einsum("bsi,bsj->sij", states, states))
        arrivals[start:stop] = arrival_times_from_tracks(
            states[:, :, 0:3], sched.times, plan, sched.seg_bounds)

    n = mc.samples
    mean = sum1 / n
    if n >= 2:
        cov = (sum2 - n * np.einsum("si,sj->sij", mean, mean)) / (n - 1)
    else:
        cov = np.zeros_like(sum2)
    return McResult(
        times=sched.times,
        mean=mean,
        covariance=cov,
        arrivals=arrivals,
        samples=n,
        seed=mc.seed,
    )
