#!/usr/bin/env python3
"""Render figures from CLI output directories.

Reads the CSV files written by ``rtaprop propagate`` / ``rtaprop compare``
and writes PNGs next to them:

* uncertainty.png  - position standard deviation vs time per method
* bounds.png       - nominal RTA with confidence bounds per waypoint

Usage: python scripts/plot_traces.py OUT_DIR
"""

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return rows


def trace_sigma(rows):
    t = np.array([float(r["t"]) for r in rows])
    var = np.array([
        float(r["cov_xx"]) + float(r["cov_yy"]) + float(r["cov_zz"])
        for r in rows
    ])
    return t, np.sqrt(np.maximum(var, 0.0))


def main(out_dir: Path) -> int:
    fig, ax = plt.subplots(figsize=(8, 5))
    plotted = False
    for name, label in [("trace.csv", "filter"),
                        ("trace_blended.csv", "blended"),
                        ("trace_gated.csv", "gated")]:
        path = out_dir / name
        if path.exists():
            t, sigma = trace_sigma(read_csv(path))
            ax.plot(t, sigma, label=label)
            plotted = True
    mc = out_dir / "mc_cov_diag.csv"
    if mc.exists():
        rows = read_csv(mc)
        t, sigma = trace_sigma(rows)
        ax.plot(t, sigma, "--", label="monte carlo")
        plotted = True
    ulpa = out_dir / "ulpa_envelope.csv"
    if ulpa.exists():
        rows = read_csv(ulpa)
        t = [float(r["t"]) for r in rows]
        w = [float(r["half_width"]) for r in rows]
        ax2 = ax.twinx()
        ax2.plot(t, w, ":", color="gray", label="window half-width [s]")
        ax2.set_ylabel("arrival window half-width [s]")
        plotted = True
    if plotted:
        ax.set_xlabel("time [s]")
        ax.set_ylabel("position sigma [m]")
        ax.legend(loc="upper left")
        fig.tight_layout()
        fig.savefig(out_dir / "uncertainty.png", dpi=120)
        print("wrote", out_dir / "uncertainty.png")

    for bounds_name in ("bounds.csv", "bounds_blended.csv"):
        bounds = out_dir / bounds_name
        if not bounds.exists():
            continue
        rows = read_csv(bounds)
        wp = [int(r["waypoint"]) for r in rows]
        nominal = [float(r["nominal_rta"]) for r in rows]
        lo = [float(r["lower"]) for r in rows]
        hi = [float(r["upper"]) for r in rows]
        fig2, bx = plt.subplots(figsize=(8, 5))
        bx.plot(wp, nominal, "o-", label="nominal RTA")
        bx.fill_between(wp, lo, hi, alpha=0.3, label="confidence bounds")
        bx.set_xlabel("waypoint")
        bx.set_ylabel("arrival time [s]")
        bx.legend()
        fig2.tight_layout()
        fig2.savefig(out_dir / "bounds.png", dpi=120)
        print("wrote", out_dir / "bounds.png")
        break
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print(__doc__)
        sys.exit(2)
    sys.exit(main(Path(sys.argv[1])))
