#!/usr/bin/env python3
"""
================================================================================
GENERATE PLOT SVG
================================================================================

PURPOSE:
    Render an experiment CSV written by run_experiments.py as a standalone
    SVG line chart, one series per group (n for numerics, k for gde-sff).

PLOT KINDS:
    numerics      x = t          y = mean_grad_inf_norm   series = n
    gde-sff       x = t          y = empirical_mean       series = k
    gde-purity    x = t          y = mean_purity          single series
    discriminate  x = iteration  y = loss                 single series

    Each series is drawn as one line whose SVG group id is "series-<value>".

DETERMINISM:
    Agg backend, fixed svg.hashsalt and no Date metadata, so the same CSV
    gives a byte-identical SVG.

USAGE:
    python generate_plot_svg.py results/numerics.csv --kind numerics --log-y

================================================================================
"""

from __future__ import annotations

import argparse
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

# =============================================================================
# CONFIGURATION
# =============================================================================

SVG_HASH_SALT = "hea-lab"
FIGSIZE = (6.0, 4.0)

# kind -> (x column, y column, series column or None, y label)
PLOT_SCHEMAS = {
    "numerics": ("t", "mean_grad_inf_norm", "n", "mean ||grad L||_inf"),
    "gde-sff": ("t", "empirical_mean", "k", "c_2k(t)"),
    "gde-purity": ("t", "mean_purity", None, "purity"),
    "discriminate": ("iteration", "loss", None, "empirical loss"),
}


def load_rows(csv_path, kind: str) -> pd.DataFrame:
    if kind not in PLOT_SCHEMAS:
        raise ValueError(f"Unknown plot kind {kind!r}; expected one of {sorted(PLOT_SCHEMAS)}")
    frame = pd.read_csv(csv_path, comment="#")
    x, y, series, _ = PLOT_SCHEMAS[kind]
    needed = [c for c in (x, y, series) if c is not None]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise ValueError(f"{csv_path} does not match plot kind {kind!r}: missing columns {missing}")
    if frame.empty:
        raise ValueError(f"{csv_path} has no data rows")
    return frame


def emit_plot(csv_path, kind: str, out_path=None, log_y: bool = False) -> Path:
    """Write <csv stem>.svg (or out_path); nothing is written on a schema error."""
    frame = load_rows(csv_path, kind)
    x, y, series, y_label = PLOT_SCHEMAS[kind]
    out_path = Path(out_path) if out_path else Path(csv_path).with_suffix(".svg")

    plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    fig, ax = plt.subplots(figsize=FIGSIZE)
    groups = [(None, frame)] if series is None else list(frame.groupby(series, sort=True))
    for value, group in groups:
        group = group.sort_values(x)
        label = kind if value is None else f"{series} = {value}"
        gid = "series-0" if value is None else f"series-{value}"
        (line,) = ax.plot(group[x], group[y], marker="o", markersize=3, label=label)
        line.set_gid(gid)

    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(y_label)
    ax.legend()
    fig.tight_layout()

    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_path.parent, prefix=f".{out_path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        os.replace(tmp, out_path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.remove(tmp)
    return out_path


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("csv", type=str)
    parser.add_argument("--kind", type=str, required=True, choices=sorted(PLOT_SCHEMAS))
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--log-y", action="store_true")
    args = parser.parse_args()

    print("=" * 70)
    print("GENERATE PLOT SVG")
    print("=" * 70)
    path = emit_plot(args.csv, args.kind, args.out, args.log_y)
    print(f"Saved {path}")


if __name__ == "__main__":
    main()
