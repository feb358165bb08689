"""Plot-ready CSV and report writers.

All numeric output uses shortest round-trip float formatting so repeated
runs with identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .baseline import McResult, UlpaEnvelope
from .kalman import SegmentTrace
from .rta import RtaEstimate
from .tuning import TuningResult


def fmt_float(x) -> str:
    return repr(float(x))


def trace_csv(traces: list[SegmentTrace]) -> str:
    """Per-step filter history: the data behind the uncertainty figures."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["segment", "step", "t", "p", "sigma_blend", "q_scale"]
        + [f"mean_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")]
        + [f"cov_{c}" for c in ("xx", "yy", "zz", "vxvx", "vyvy", "vzvz")]
        + ["trace"]
    )
    for tr in traces:
        diag = np.einsum("sii->si", tr.covariances)
        for j in range(len(tr.times)):
            writer.writerow(
                [tr.segment_index, j, fmt_float(tr.times[j]), fmt_float(tr.progress[j]),
                 fmt_float(tr.sigma_blend[j]), fmt_float(tr.q_scale[j])]
                + [fmt_float(v) for v in tr.means[j]]
                + [fmt_float(v) for v in diag[j]]
                + [fmt_float(diag[j].sum())]
            )
    return buf.getvalue()


def bounds_csv(estimates: list[RtaEstimate]) -> str:
    """Per-waypoint arrival-time bounds."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["waypoint", "nominal_rta", "variance", "lower", "upper",
                     "confidence"])
    for est in estimates:
        writer.writerow([
            est.waypoint_index, fmt_float(est.nominal_rta), fmt_float(est.time_variance),
            fmt_float(est.lower), fmt_float(est.upper), fmt_float(est.confidence),
        ])
    return buf.getvalue()


def spline_csv(samples: np.ndarray) -> str:
    """Debug dump of sampled position/velocity/acceleration rows."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az"])
    for row in samples:
        writer.writerow([fmt_float(v) for v in row])
    return buf.getvalue()


def ulpa_csv(envelope: UlpaEnvelope) -> str:
    """Arrival-window polyline (t, half_width) plus waypoint bounds."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t", "half_width"])
    for t, w in envelope.breakpoints:
        writer.writerow([fmt_float(t), fmt_float(w)])
    return buf.getvalue()


def mc_cov_csv(result: McResult) -> str:
    """Per-step empirical covariance diagonals."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t"] + [f"cov_{c}" for c in
                             ("xx", "yy", "zz", "vxvx", "vyvy", "vzvz")])
    diag = np.einsum("sii->si", result.covariance)
    for j in range(len(result.times)):
        writer.writerow([fmt_float(result.times[j])] + [fmt_float(v) for v in diag[j]])
    return buf.getvalue()


def mc_arrivals_csv(result: McResult, waypoint: int) -> str:
    """Arrival-time samples for one arrival waypoint (for histogramming)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["arrival_time"])
    for v in result.arrivals[:, waypoint]:
        writer.writerow([fmt_float(v)])
    return buf.getvalue()


def tuning_report_json(result: TuningResult) -> str:
    doc = {
        "q_max_estimate": [[float(v) for v in row] for row in result.q_max_estimate],
        "q_max_diagonal": [float(v) for v in np.diag(result.q_max_estimate)],
        "flights_used": result.flights_used,
        "train_ids": list(result.train_ids),
        "verify_ids": list(result.verify_ids),
        "per_flight_diagonals": {
            fid: [float(v) for v in np.diag(cov)]
            for fid, cov in sorted(result.per_flight.items())
        },
        "pruning": {
            "max_rms": result.prune_report.max_rms,
            "retained": list(result.prune_report.retained),
            "rejected": [
                {"flight_id": fid, "rms": rms}
                for fid, rms in result.prune_report.rejected
            ],
        },
        "accuracy": result.accuracy,
        "per_waypoint_accuracy": list(result.per_waypoint_accuracy),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
