"""Decay-bound figure: ||u(t)||^2 per path against the exponential envelope.

The rate in the envelope e^{-mu t} ||u0||^2 comes from the run metadata, not
from a fit; a least-squares fit of the observed decay is annotated next to
it for comparison.
"""

from __future__ import annotations

import argparse

import matplotlib.pyplot as plt
import numpy as np

from .common import SchemaError, annotate_margin, fmt, read_trajectory, save


def plot_decay(csv_paths, out_path):
    if not csv_paths:
        raise SchemaError("no trajectory files given")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    mu = None
    envelope_drawn = False
    any_positive = False
    fitted = []
    for path in csv_paths:
        header, data = read_trajectory(path)
        meta = header.get("meta", {})
        mu = float(meta["mu"]) if "mu" in meta else mu
        t = data[:, 0]
        sq = data[:, 1] ** 2
        any_positive |= bool(np.any(sq > 0))
        ax.plot(t, sq, lw=0.7, alpha=0.6)
        if not envelope_drawn and mu is not None and sq[0] > 0:
            ax.plot(t, (1.0 + 0.0) * sq[0] * np.exp(-mu * t), "k--", lw=1.5,
                    label="guaranteed envelope")
            envelope_drawn = True
        pos = sq > 0
        if pos.sum() >= 2:
            fitted.append(-np.polyfit(t[pos], np.log(sq[pos]), 1)[0])
    if any_positive:
        ax.set_yscale("log")  # falls back to linear for all-zero data
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|u(t)\|_{L^2}^2$")
    ax.set_title("squared-norm decay vs guaranteed rate")
    lines = []
    if mu is not None:
        lines.append(f"mu={fmt(mu)}")
        print(f"mu={fmt(mu)}")
    if fitted:
        lines.append(f"fitted_rate={fmt(np.mean(fitted))}")
        print(f"fitted_rate={fmt(np.mean(fitted))}")
    annotate_margin(ax, lines or ["all-zero data"])
    if envelope_drawn:
        ax.legend(loc="upper right", fontsize=8)
    return save(fig, out_path), {"mu": mu, "fitted_rate": float(np.mean(fitted)) if fitted else None}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csvs", nargs="+", help="trajectory CSV files")
    ap.add_argument("--out", required=True, help="output image path")
    args = ap.parse_args(argv)
    try:
        plot_decay(args.csvs, args.out)
    except SchemaError as exc:
        print(f"error: {exc}")
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
