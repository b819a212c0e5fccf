"""Energy-dissipation figure: the functional psi along each trajectory."""

from __future__ import annotations

import argparse

import matplotlib.pyplot as plt

from .common import SchemaError, annotate_margin, fmt, read_trajectory, save


def plot_energy(csv_paths, out_path):
    if not csv_paths:
        raise SchemaError("no trajectory files given")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    first_final = None
    for path in csv_paths:
        _, data = read_trajectory(path)
        ax.plot(data[:, 0], data[:, 6], lw=0.9)
        if first_final is None:
            first_final = data[-1, 6]
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\psi(u(t))$")
    ax.set_title("energy along trajectories")
    annotate_margin(ax, [f"psi_final={fmt(first_final)}"])
    print(f"psi_final={fmt(first_final)}")
    return save(fig, out_path), {"psi_final": float(first_final)}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csvs", nargs="+", help="trajectory CSV files")
    ap.add_argument("--out", required=True, help="output image path")
    args = ap.parse_args(argv)
    try:
        plot_energy(args.csvs, args.out)
    except SchemaError as exc:
        print(f"error: {exc}")
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
