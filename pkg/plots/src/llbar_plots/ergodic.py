"""Ergodic-average figure: the running Cesaro mean of the H^1 mass."""

from __future__ import annotations

import argparse

import matplotlib.pyplot as plt
import numpy as np

from .common import SchemaError, annotate_margin, fmt, read_trajectory, save


def running_mean(t, f):
    """Trapezoid (1/T) int_0^T f dt at every record time (first entry: f itself)."""
    out = np.empty_like(f)
    out[0] = f[0]
    if len(t) > 1:
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])
        span = t - t[0]
        out[1:] = cum[1:] / span[1:]
    return out


def plot_ergodic(csv_paths, out_path):
    if not csv_paths:
        raise SchemaError("no trajectory files given")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    final_mean = None
    for path in csv_paths:
        _, data = read_trajectory(path)
        t = data[:, 0]
        h1_sq = data[:, 1] ** 2 + data[:, 2] ** 2
        ax.plot(t, h1_sq, lw=0.5, alpha=0.35)
        mean = running_mean(t, h1_sq)
        ax.plot(t, mean, lw=1.6)
        if final_mean is None:
            final_mean = mean[-1]
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|u\|_{H^1}^2$ and running mean")
    ax.set_title("time-averaged observable")
    annotate_margin(ax, [f"mean_final={fmt(final_mean)}"])
    print(f"mean_final={fmt(final_mean)}")
    return save(fig, out_path), {"mean_final": float(final_mean)}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csvs", nargs="+", help="trajectory CSV files")
    ap.add_argument("--out", required=True, help="output image path")
    args = ap.parse_args(argv)
    try:
        plot_ergodic(args.csvs, args.out)
    except SchemaError as exc:
        print(f"error: {exc}")
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
