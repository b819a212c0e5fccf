"""Vanishing-exchange error curve on log-log axes with its fitted slope.

The slope is recomputed from the plotted points with the same least-squares
formula the simulator stamps into the file metadata, so the annotation and
the metadata agree to rounding.
"""

from __future__ import annotations

import argparse

import matplotlib.pyplot as plt

from .common import SchemaError, annotate_margin, fmt, loglog_slope, read_csv, require_columns, save

COLUMNS = ["eps", "err_sup_l2", "err_int_h1", "err_total"]


def plot_llb_limit(csv_path, out_path):
    header, columns, data = read_csv(csv_path)
    require_columns(csv_path, columns, COLUMNS)
    if len(data) < 2:
        raise SchemaError(f"{csv_path}: need at least two exchange values")
    eps = data[:, 0]
    err = data[:, 3]
    slope = loglog_slope(eps, err)
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    ax.loglog(eps, err, "o-", label="coupled-path error")
    ax.set_xlabel(r"exchange relaxation $\epsilon$")
    ax.set_ylabel("error functional")
    ax.set_title("convergence to the second-order limit model")
    annotate_margin(ax, [f"slope={fmt(slope)}"])
    ax.legend(fontsize=8)
    print(f"slope={fmt(slope)}")
    meta_slope = header.get("meta", {}).get("loglog_slope")
    return save(fig, out_path), {"slope": slope, "meta_slope": meta_slope}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="limit-sweep CSV file")
    ap.add_argument("--out", required=True, help="output image path")
    args = ap.parse_args(argv)
    try:
        plot_llb_limit(args.csv, args.out)
    except SchemaError as exc:
        print(f"error: {exc}")
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
