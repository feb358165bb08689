"""Measurement-noise tuning from observed flight tracks.

The maximum measurement-noise covariance (how far an uncorrected aircraft
strays from plan) is estimated from surveillance data: each track is
aligned to its flight plan, per-sample deviations from the planned
position are collected in the plan's local frame, their per-flight sample
covariances are averaged across flights, and poorly matching flights are
pruned first.  A seeded train/verify split supports scoring arrival-time
prediction accuracy as confidence-bound coverage on the held-out flights.

Track files are delimited text with columns
``timestamp,flight_id,lat,lon,alt_m[,gs_mps]`` (header required, one
flight per file, timestamps in seconds).
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AdsbError, ConfigError
from .geo import FlightPlan, LocalPlan, enu_to_geodetic, geodetic_to_enu, to_local_frame
from .kalman import FilterConfig, propagate_plan, waypoint_velocity_variances
from .rta import RtaEstimate, estimate_rta
from .spline import TrajectorySpline, fit_trajectory

REQUIRED_COLUMNS = ("timestamp", "flight_id", "lat", "lon", "alt_m")
OPTIONAL_COLUMNS = ("gs_mps",)


@dataclass(frozen=True)
class IngestReport:
    """What happened to the raw rows on the way in."""

    rows_total: int
    rows_dropped: int
    sorted_applied: bool
    duplicates_removed: int


@dataclass(frozen=True)
class AdsbTrack:
    """One flight's surveillance samples, time-ordered and deduplicated."""

    flight_id: str
    times: np.ndarray = field(repr=False)       # (M,) seconds
    positions: np.ndarray = field(repr=False)   # (M, 3) lat deg, lon deg, alt m
    ground_speed: np.ndarray | None = field(default=None, repr=False)
    report: IngestReport | None = None

    def __post_init__(self):
        ts = np.ascontiguousarray(np.asarray(self.times, dtype=float))
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape != (len(ts), 3):
            raise AdsbError("track arrays have inconsistent shapes")
        if len(ts) == 0:
            raise AdsbError("empty track")
        if np.any(np.diff(ts) <= 0.0):
            raise AdsbError("track timestamps must be strictly increasing after ingest")
        ts.flags.writeable = False
        pos.flags.writeable = False
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "positions", pos)


@dataclass(frozen=True)
class DeviationSeries:
    """Per-matched-time deviation of the observed track from plan."""

    flight_id: str
    times: np.ndarray = field(repr=False)        # (M,) plan-relative seconds
    deviations: np.ndarray = field(repr=False)   # (M, 3) meters, local frame
    time_offset: float = 0.0                     # track seconds -> plan seconds

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.sum(self.deviations**2, axis=1))))


@dataclass(frozen=True)
class PruneReport:
    retained: tuple[str, ...]
    rejected: tuple[tuple[str, float], ...]   # (flight_id, rms)
    max_rms: float


@dataclass(frozen=True)
class TuningResult:
    """Output of the tuning pipeline."""

    q_max_estimate: np.ndarray = field(repr=False)         # (3,3)
    per_flight: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    flights_used: int = 0
    prune_report: PruneReport | None = None
    train_ids: tuple[str, ...] = ()
    verify_ids: tuple[str, ...] = ()
    accuracy: float | None = None
    per_waypoint_accuracy: tuple[float, ...] = ()


def parse_adsb(text: str) -> AdsbTrack:
    """Parse one track file; drops out-of-range rows, sorts and
    deduplicates timestamps, and reports what it did."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise AdsbError("empty ADS-B file")
    fields = [f.strip() for f in reader.fieldnames]
    unknown = [f for f in fields if f not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise AdsbError(f"unknown columns: {', '.join(unknown)}")
    missing = [c for c in REQUIRED_COLUMNS if c not in fields]
    if missing:
        raise AdsbError(f"missing columns: {', '.join(missing)}")
    has_gs = "gs_mps" in fields

    rows_total = 0
    dropped = 0
    times, lats, lons, alts, gss = [], [], [], [], []
    flight_ids = set()
    for row in reader:
        rows_total += 1
        try:
            t = float(row["timestamp"])
            lat = float(row["lat"])
            lon = float(row["lon"])
            alt = float(row["alt_m"])
            gs = float(row["gs_mps"]) if has_gs and row["gs_mps"] != "" else np.nan
        except (TypeError, ValueError):
            dropped += 1
            continue
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0 and np.isfinite(t)):
            dropped += 1
            continue
        flight_ids.add(row["flight_id"].strip())
        times.append(t)
        lats.append(lat)
        lons.append(lon)
        alts.append(alt)
        gss.append(gs)
    if not times:
        raise AdsbError("no valid rows in ADS-B file")
    if len(flight_ids) != 1:
        raise AdsbError(f"expected one flight per file, found {sorted(flight_ids)}")

    times = np.asarray(times)
    order = np.argsort(times, kind="stable")
    sorted_applied = bool(np.any(np.diff(times) < 0.0))
    times = times[order]
    pos = np.column_stack([lats, lons, alts])[order]
    gs = np.asarray(gss)[order]

    keep = np.concatenate([[True], np.diff(times) > 0.0])
    duplicates = int(np.sum(~keep))

    report = IngestReport(
        rows_total=rows_total,
        rows_dropped=dropped,
        sorted_applied=sorted_applied,
        duplicates_removed=duplicates,
    )
    return AdsbTrack(
        flight_id=flight_ids.pop(),
        times=times[keep],
        positions=pos[keep],
        ground_speed=(gs[keep] if has_gs else None),
        report=report,
    )


def load_adsb(path) -> AdsbTrack:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_adsb(fh.read())


def serialize_adsb(track: AdsbTrack) -> str:
    """Write a track back to the canonical column format."""
    buf = io.StringIO()
    has_gs = track.ground_speed is not None
    cols = list(REQUIRED_COLUMNS) + (["gs_mps"] if has_gs else [])
    writer = csv.writer(buf)
    writer.writerow(cols)
    for i in range(len(track.times)):
        row = [repr(float(track.times[i])), track.flight_id,
               repr(float(track.positions[i, 0])),
               repr(float(track.positions[i, 1])),
               repr(float(track.positions[i, 2]))]
        if has_gs:
            row.append(repr(float(track.ground_speed[i])))
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Matching and covariance extraction
# ---------------------------------------------------------------------------

def track_local_positions(track: AdsbTrack, plan: FlightPlan) -> np.ndarray:
    """Track positions in the plan's local ENU frame, (M, 3) meters."""
    return geodetic_to_enu(
        track.positions[:, 0], track.positions[:, 1], track.positions[:, 2],
        plan.waypoints[0],
    )


def align_track_epoch(track: AdsbTrack, plan: FlightPlan) -> float:
    """Seconds to subtract from track time so plan time 0 is the track's
    closest approach to the first waypoint."""
    local = track_local_positions(track, plan)
    dist = np.linalg.norm(local, axis=1)
    return float(track.times[int(np.argmin(dist))])


def match_track_to_plan(
    track: AdsbTrack,
    plan: FlightPlan,
    spline: TrajectorySpline,
) -> DeviationSeries:
    """Deviation of each in-horizon track sample from the planned position.

    The track epoch is aligned so its closest approach to the first
    waypoint coincides with the first RTA; samples outside the plan
    horizon are ignored.
    """
    offset = align_track_epoch(track, plan)
    aligned_t = track.times - offset
    in_horizon = (aligned_t >= spline.t_start) & (aligned_t <= spline.t_end)
    if np.count_nonzero(in_horizon) < 2:
        raise AdsbError(
            f"track {track.flight_id} does not overlap the plan horizon")
    local = track_local_positions(track, plan)[in_horizon]
    t_sel = aligned_t[in_horizon]
    deviations = local - spline.position_at(t_sel)
    return DeviationSeries(
        flight_id=track.flight_id,
        times=t_sel,
        deviations=deviations,
        time_offset=offset,
    )


def extract_covariance(dev: DeviationSeries) -> np.ndarray:
    """Unbiased sample covariance of the deviation vectors, (3, 3)."""
    if len(dev.times) < 2:
        raise AdsbError(
            f"flight {dev.flight_id}: need >= 2 matched samples for a covariance")
    cov = np.cov(dev.deviations, rowvar=False, ddof=1)
    return 0.5 * (cov + cov.T)


def prune_tracks(
    deviations: list[DeviationSeries],
    max_rms: float,
) -> tuple[list[DeviationSeries], PruneReport]:
    """Keep flights whose deviation RMS is within max_rms meters."""
    if max_rms <= 0.0:
        raise ConfigError("max_rms must be positive")
    retained, rejected = [], []
    for dev in deviations:
        if dev.rms <= max_rms:
            retained.append(dev)
        else:
            rejected.append((dev.flight_id, dev.rms))
    report = PruneReport(
        retained=tuple(d.flight_id for d in retained),
        rejected=tuple(rejected),
        max_rms=max_rms,
    )
    return retained, report


def average_covariances(per_flight) -> np.ndarray:
    """Element-wise arithmetic mean of per-flight covariances."""
    mats = [np.asarray(m, dtype=float) for m in per_flight]
    if not mats:
        raise ConfigError("no covariances to average")
    if any(m.shape != (3, 3) for m in mats):
        raise ConfigError("covariances must be 3x3")
    return np.mean(mats, axis=0)


def split_train_verify(
    flight_ids,
    train_fraction: float = 0.7,
    seed: int = 0,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Disjoint seeded split; deterministic for a given id set and seed."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    ids = sorted(flight_ids)
    gen = np.random.Generator(np.random.Philox(key=np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(0x5EED5)], dtype=np.uint64)))
    perm = gen.permutation(len(ids))
    n_train = int(round(train_fraction * len(ids)))
    n_train = min(max(n_train, 1), len(ids) - 1) if len(ids) >= 2 else len(ids)
    train = tuple(ids[i] for i in sorted(perm[:n_train]))
    verify = tuple(ids[i] for i in sorted(perm[n_train:]))
    return train, verify


# ---------------------------------------------------------------------------
# Arrival observation and accuracy
# ---------------------------------------------------------------------------

def observed_arrival_times(
    track: AdsbTrack,
    plan: FlightPlan,
    local_plan: LocalPlan,
) -> np.ndarray:
    """First-crossing arrival time (plan-relative seconds) at each arrival
    waypoint, NaN where the track never crosses a waypoint plane."""
    from .baseline import arrival_times_from_tracks

    if len(track.times) < 2:
        return np.full(local_plan.n_segments, np.nan)
    offset = align_track_epoch(track, plan)
    aligned_t = track.times - offset
    local = track_local_positions(track, plan)
    windows = np.searchsorted(aligned_t, local_plan.times[:-1])
    windows = np.minimum(windows, len(aligned_t) - 2)
    return arrival_times_from_tracks(
        local[None, :, :], aligned_t, local_plan, windows)[0]


def arrival_accuracy(predictions: list[RtaEstimate], actuals) -> float:
    """Fraction of flights whose observed arrival lies inside the
    predicted confidence bounds."""
    actuals = np.asarray(actuals, dtype=float)
    if len(predictions) != len(actuals):
        raise ConfigError(
            f"{len(predictions)} predictions vs {len(actuals)} actuals")
    if len(predictions) == 0:
        raise ConfigError("nothing to score")
    hits = [
        1.0 if (est.lower <= act <= est.upper) else 0.0
        for est, act in zip(predictions, actuals)
        if np.isfinite(act)
    ]
    if not hits:
        raise ConfigError("no finite actual arrival times")
    return float(np.mean(hits))


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TuningOptions:
    """Knobs for the tune pipeline."""

    max_rms: float = 500.0
    train_fraction: float = 0.7
    seed: int = 0
    confidence: float = 0.95
    delta: float = 1.0
    v_bar0: float | None = None
    jobs: int = 1


def run_tuning(
    pairs: list[tuple[FlightPlan, AdsbTrack]],
    filter_cfg: FilterConfig,
    opts: TuningOptions = TuningOptions(),
) -> TuningResult:
    """Full pipeline: match -> prune -> split -> average -> verify.

    The averaged train-split deviation covariance becomes the Q_max
    estimate; its mean diagonal re-enters the (isotropic) filter as
    q_max_scale for the verify pass, which scores how often the observed
    final-waypoint arrival falls inside the predicted confidence bounds.
    """
    if not pairs:
        raise ConfigError("no (plan, track) pairs supplied")

    def prepare(pair):
        plan, track = pair
        local = to_local_frame(plan)
        spline = fit_trajectory(local)
        dev = match_track_to_plan(track, plan, spline)
        return track.flight_id, (plan, local, spline, track, dev)

    if opts.jobs > 1:
        with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
            prepared = dict(pool.map(prepare, pairs))
    else:
        prepared = dict(prepare(p) for p in pairs)

    devs = [prepared[fid][4] for fid in sorted(prepared)]
    retained, prune_report = prune_tracks(devs, opts.max_rms)
    if not retained:
        raise ConfigError(
            f"no flights retained after pruning at max_rms={opts.max_rms} m")

    retained_ids = [d.flight_id for d in retained]
    train_ids, verify_ids = split_train_verify(
        retained_ids, opts.train_fraction, opts.seed)

    per_flight = {
        fid: extract_covariance(prepared[fid][4]) for fid in retained_ids
    }
    q_max_estimate = average_covariances([per_flight[f] for f in train_ids])

    q_scale = max(float(np.trace(q_max_estimate)) / 3.0, filter_cfg.q_min_scale)
    tuned_cfg = replace(filter_cfg, q_max_scale=q_scale)

    def score(fid):
        plan, local, spline, track, _ = prepared[fid]
        traces = propagate_plan(spline, local, tuned_cfg)
        estimates = estimate_rta(
            local, waypoint_velocity_variances(traces),
            confidence=opts.confidence, delta=opts.delta, v_bar0=opts.v_bar0)
        actual = observed_arrival_times(track, plan, local)
        return estimates[1:], actual

    accuracy = None
    per_wp_acc: tuple[float, ...] = ()
    if verify_ids:
        if opts.jobs > 1:
            with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
                scored = list(pool.map(score, verify_ids))
        else:
            scored = [score(fid) for fid in verify_ids]
        finals = [ests[-1] for ests, _ in scored]
        actual_finals = [act[-1] for _, act in scored]
        accuracy = arrival_accuracy(finals, actual_finals)
        n_wp = len(scored[0][0])
        per_wp_acc = tuple(
            arrival_accuracy([ests[k] for ests, _ in scored],
                             [act[k] for _, act in scored])
            for k in range(n_wp)
        )

    return TuningResult(
        q_max_estimate=q_max_estimate,
        per_flight=per_flight,
        flights_used=len(train_ids),
        prune_report=prune_report,
        train_ids=train_ids,
        verify_ids=verify_ids,
        accuracy=accuracy,
        per_waypoint_accuracy=per_wp_acc,
    )


# ---------------------------------------------------------------------------
# Synthetic corpus generation (fixtures and self-consistency tests)
# ---------------------------------------------------------------------------

def synthesize_track(
    plan: FlightPlan,
    spline: TrajectorySpline,
    noise_cov,
    seed: int,
    flight_id: str,
    rate_hz: float = 1.0,
    epoch_offset: float = 0.0,
    arrival_offset: float = 0.0,
    pad: float = 0.0,
) -> AdsbTrack:
    """Sample a plausible observed track for a plan.

    Positions follow the plan spline plus zero-mean Gaussian noise with
    covariance ``noise_cov``.  ``arrival_offset`` delays (positive) or
    advances the arrival by shifting the along-route schedule over the
    final approach, leaving the start anchored; ``epoch_offset`` shifts
    all timestamps.  ``pad`` extends sampling past the nominal end so
    late arrivals stay observable.
    """
    gen = np.random.Generator(np.random.Philox(key=np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(0xADB)], dtype=np.uint64)))
    t0, t1 = spline.t_start, spline.t_end
    duration = t1 - t0
    step = 1.0 / rate_hz
    times = np.arange(t0, t1 + pad + 0.5 * step, step)

    # Route-time mapping: identity until the ramp window opens, then a
    # uniform stretch that lands arrival at t1 + arrival_offset.
    ramp_start = t0 + 0.6 * duration
    if arrival_offset == 0.0:
        route_t = times.copy()
    else:
        scale = (t1 - ramp_start) / (t1 + arrival_offset - ramp_start)
        route_t = np.where(
            times <= ramp_start, times,
            ramp_start + (times - ramp_start) * scale,
        )
    route_t = np.clip(route_t, t0, None)

    # Fly through the final waypoint at the terminal velocity rather than
    # hovering on it, so plane crossings stay crisp for late samples.
    inside = np.clip(route_t, t0, t1)
    local = spline.position_at(inside)
    past = route_t > t1
    if np.any(past):
        v_end = spline.velocity_at(t1)
        local[past] += np.outer(route_t[past] - t1, v_end)

    noise_cov = np.asarray(noise_cov, dtype=float)
    if np.any(noise_cov):
        chol = np.linalg.cholesky(noise_cov + 1e-12 * np.eye(3))
        local = local + gen.standard_normal((len(times), 3)) @ chol.T
    geo_rows = enu_to_geodetic(local, plan.waypoints[0])
    return AdsbTrack(
        flight_id=flight_id,
        times=times + epoch_offset + plan.waypoints[0].rta,
        positions=geo_rows,
        ground_speed=None,
        report=None,
    )
