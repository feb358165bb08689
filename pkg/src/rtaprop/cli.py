"""Batch command-line front end.

Three subcommands wire the pipeline together:

* ``propagate``: plan -> local frame -> spline -> filter -> RTA bounds;
  writes the per-step trace and per-waypoint bounds.
* ``compare``: blended filter vs. gated variant vs. constant-growth
  window vs. Monte Carlo on one plan, with a deterministic summary and a
  separate (non-deterministic) timing report.
* ``tune``: ADS-B corpus + plans -> pruned deviation covariances ->
  averaged Q_max estimate -> verify-split arrival accuracy.

Every output directory gets a ``manifest.json`` capturing the resolved
configuration, input digests, seed, and backend; identical manifests
yield byte-identical data outputs (``timings.txt`` is explicitly outside
that contract).

Exit codes: 0 success, 2 input error, 3 numerical failure, 1 unexpected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .baseline import gated_kf, monte_carlo_oracle, ulpa_bounds
from .config import RunConfig, load_config
from .errors import InputError, NumericalError
from .export import (
    bounds_csv,
    mc_arrivals_csv,
    mc_cov_csv,
    trace_csv,
    tuning_report_json,
    ulpa_csv,
    fmt_float,
)
from .geo import load_flight_plan, to_local_frame
from .kalman import propagate_plan, waypoint_velocity_variances
from .rta import estimate_rta, normal_quantile
from .spline import fit_trajectory
from .tuning import load_adsb, run_tuning


log = logging.getLogger("rtaprop")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write(out_dir: Path, name: str, text: str) -> None:
    (out_dir / name).write_text(text, encoding="utf-8")


def _manifest(command: str, cfg: RunConfig, seed: int, inputs: list[Path]) -> str:
    doc = {
        "command": command,
        "tool_version": __version__,
        "backend": _kernels.backend_name(),
        "seed": seed,
        "config": {k: cfg.values[k] for k in sorted(cfg.values)},
        "inputs": {p.name: _sha256(p) for p in sorted(inputs)},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _prepare(plan_path: Path, cfg: RunConfig):
    plan = load_flight_plan(plan_path)
    local = to_local_frame(plan)
    spline = fit_trajectory(local)
    return plan, local, spline


def cmd_propagate(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    plan_path = Path(args.plan)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    _, local, spline = _prepare(plan_path, cfg)
    traces = propagate_plan(spline, local, cfg.filter_config())
    estimates = estimate_rta(
        local, waypoint_velocity_variances(traces),
        confidence=cfg.confidence, delta=cfg.delta, v_bar0=cfg.v_bar0)

    _write(out_dir, "trace.csv", trace_csv(traces))
    _write(out_dir, "bounds.csv", bounds_csv(estimates))
    if args.dump_spline is not None:
        from .export import spline_csv
        from .spline import sample_trajectory
        _write(out_dir, "spline.csv",
               spline_csv(sample_trajectory(spline, args.dump_spline)))
    inputs = [plan_path] + ([Path(args.config)] if args.config else [])
    _write(out_dir, "manifest.json", _manifest("propagate", cfg, seed, inputs))
    log.info("propagate: wrote %s", out_dir)
    return 0


def _max_step_drop(traces) -> tuple[float, float]:
    """(largest single-step decrease, largest absolute single-step change)
    of the position standard deviation across a run."""
    sigma = np.concatenate([tr.position_std() for tr in traces])
    steps = np.diff(sigma)
    drop = float(np.max(-steps)) if len(steps) else 0.0
    change = float(np.max(np.abs(steps))) if len(steps) else 0.0
    return drop, change


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    plan_path = Path(args.plan)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    _, local, spline = _prepare(plan_path, cfg)
    fcfg = cfg.filter_config()
    z = normal_quantile(cfg.confidence)
    timings: dict[str, float] = {}
    summary_rows = []

    _kernels.warmup()

    t0 = time.perf_counter()
    blended = propagate_plan(spline, local, fcfg)
    timings["blended"] = time.perf_counter() - t0
    est_blended = estimate_rta(
        local, waypoint_velocity_variances(blended),
        confidence=cfg.confidence, delta=cfg.delta, v_bar0=cfg.v_bar0)
    _write(out_dir, "trace_blended.csv", trace_csv(blended))
    _write(out_dir, "bounds_blended.csv", bounds_csv(est_blended))
    drop, change = _max_step_drop(blended)
    summary_rows.append(("blended", drop, change,
                         est_blended[-1].upper - est_blended[-1].lower))

    t0 = time.perf_counter()
    gated = gated_kf(spline, local, fcfg)
    timings["gated"] = time.perf_counter() - t0
    est_gated = estimate_rta(
        local, waypoint_velocity_variances(gated),
        confidence=cfg.confidence, delta=cfg.delta, v_bar0=cfg.v_bar0)
    _write(out_dir, "trace_gated.csv", trace_csv(gated))
    _write(out_dir, "bounds_gated.csv", bounds_csv(est_gated))
    drop, change = _max_step_drop(gated)
    summary_rows.append(("gated", drop, change,
                         est_gated[-1].upper - est_gated[-1].lower))

    t0 = time.perf_counter()
    envelope = ulpa_bounds(local, cfg.ulpa_config())
    timings["ulpa"] = time.perf_counter() - t0
    _write(out_dir, "ulpa_envelope.csv", ulpa_csv(envelope))
    terminal_width = float(np.diff(envelope.waypoint_bounds[-1])[0])
    summary_rows.append(("ulpa", 0.0, 0.0, terminal_width))

    t0 = time.perf_counter()
    mc = monte_carlo_oracle(spline, local, fcfg, cfg.mc_config(seed))
    timings["monte_carlo"] = time.perf_counter() - t0
    _write(out_dir, "mc_cov_diag.csv", mc_cov_csv(mc))
    for k in range(local.n_segments):
        _write(out_dir, f"mc_arrivals_wp{k + 1:03d}.csv", mc_arrivals_csv(mc, k))
    mc_sigma = np.sqrt(np.maximum(
        np.einsum("sii->si", mc.covariance)[:, 0:3].sum(axis=1), 0.0))
    mc_steps = np.diff(mc_sigma)
    summary_rows.append((
        "monte_carlo",
        float(np.max(-mc_steps)) if len(mc_steps) else 0.0,
        float(np.max(np.abs(mc_steps))) if len(mc_steps) else 0.0,
        2.0 * z * float(mc.arrival_std()[-1]),
    ))

    lines = ["method,max_step_sigma_drop,max_step_sigma_change,terminal_bound_width_s"]
    for method, drop, change, width in summary_rows:
        lines.append(f"{method},{fmt_float(drop)},{fmt_float(change)},{fmt_float(width)}")
    _write(out_dir, "summary.csv", "\n".join(lines) + "\n")

    # Wall-clock is inherently non-deterministic; quarantined to its own
    # file, outside the byte-identity contract.
    _write(out_dir, "timings.txt", "".join(
        f"{m}: {timings[m]:.6f} s\n" for m in sorted(timings)))

    inputs = [plan_path] + ([Path(args.config)] if args.config else [])
    _write(out_dir, "manifest.json", _manifest("compare", cfg, seed, inputs))
    log.info("compare: wrote %s", out_dir)
    return 0


def cmd_tune(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    adsb_dir = Path(args.adsb_dir)
    plans_dir = Path(args.plans_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    track_files = sorted(adsb_dir.glob("*.csv"))
    if not track_files:
        raise InputError(f"no .csv track files under {adsb_dir}")
    pairs = []
    inputs = []
    for track_file in track_files:
        plan_file = plans_dir / (track_file.stem + ".yaml")
        if not plan_file.exists():
            raise InputError(f"no plan file {plan_file} for track {track_file.name}")
        pairs.append((load_flight_plan(plan_file), load_adsb(track_file)))
        inputs.extend([track_file, plan_file])

    opts = cfg.tuning_options(seed=seed, jobs=args.jobs)
    result = run_tuning(pairs, cfg.filter_config(), opts)

    _write(out_dir, "tuning_report.json", tuning_report_json(result))
    if args.config:
        inputs.append(Path(args.config))
    _write(out_dir, "manifest.json", _manifest("tune", cfg, seed, inputs))
    log.info("tune: %d flights used, accuracy=%s", result.flights_used,
             result.accuracy)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtaprop",
        description="Propagate spatial and temporal uncertainty along 4D flight plans.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="filter + RTA bounds for one plan")
    p.add_argument("plan", help="flight plan YAML file")
    p.add_argument("--config", default=None, help="run config YAML")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--dump-spline", type=float, default=None, metavar="STRIDE",
                   help="also write spline.csv sampled at STRIDE seconds")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("compare", help="blended vs gated vs window vs Monte Carlo")
    p.add_argument("plan", help="flight plan YAML file")
    p.add_argument("--config", default=None, help="run config YAML")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("tune", help="estimate Q_max from an ADS-B corpus")
    p.add_argument("adsb_dir", help="directory of per-flight track CSVs")
    p.add_argument("plans_dir", help="directory of matching plan YAMLs")
    p.add_argument("--config", default=None, help="run config YAML")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("RTAPROP_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
