"""Shared CSV contract and figure plumbing.

These scripts consume only the public file format of the simulator: a
commented header block (`# key=value` lines plus one `# meta=<json>` line)
followed by a comma-separated table with 17-significant-digit floats.  They
never import the simulator package, so the figures are reproducible from
the files alone.
"""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TRAJECTORY_COLUMNS = [
    "t", "norm_u_L2", "norm_grad_u", "norm_lap_u", "norm_u_L4",
    "norm_u_Linf", "psi", "norm_H_L2", "norm_grad_H", "quad_var",
]


class SchemaError(ValueError):
    """Input file does not follow the expected CSV contract."""


def read_csv(path):
    """Return (header dict, column list, float matrix) for one output file."""
    if not os.path.exists(path):
        raise SchemaError(f"{path}: no such file")
    header = {}
    columns = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                body = line[2:]
                if "=" in body:
                    key, val = body.split("=", 1)
                    header[key] = json.loads(val) if key == "meta" else val
                continue
            if columns is None:
                columns = line.split(",")
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if columns is None:
        raise SchemaError(f"{path}: no column row found")
    data = np.array(rows) if rows else np.empty((0, len(columns)))
    return header, columns, data


def require_columns(path, columns, expected):
    if list(columns) != list(expected):
        missing = [c for c in expected if c not in columns]
        extra = [c for c in columns if c not in expected]
        raise SchemaError(
            f"{path}: column mismatch (missing {missing or 'none'}, "
            f"unexpected {extra or 'none'})")


def read_trajectory(path):
    header, columns, data = read_csv(path)
    require_columns(path, columns, TRAJECTORY_COLUMNS)
    if len(data) == 0:
        raise SchemaError(f"{path}: empty trajectory")
    return header, data


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log10(y) vs log10(x); matches the run metadata."""
    return float(np.polyfit(np.log10(np.asarray(xs, dtype=float)),
                            np.log10(np.asarray(ys, dtype=float)), 1)[0])


def annotate_margin(ax, lines):
    ax.text(0.02, 0.02, "\n".join(lines), transform=ax.transAxes,
            fontsize=8, family="monospace", va="bottom",
            bbox=dict(boxstyle="round", facecolor="white", alpha=0.8))


def save(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
