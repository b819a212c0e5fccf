"""Ensemble execution and CSV emission.

Every output file starts with a commented header block: the resolved config
(one JSON line), its hash, and the digest of the noise increments the run
consumed, followed by the column row.  Floats are written with 17 significant
digits so files round-trip bit-exactly and byte-identical reruns are a
meaningful contract.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .config import ExperimentConfig
from .diagnostics import (CSV_COLUMNS, DecayReport, RecordCollector, StateHistory,
                          check_pathwise_decay, llb_limit_error, loglog_slope,
                          require_decay_hypotheses)
from .integrator import integrate
from .noise import NoisePath

FORMAT_VERSION = "llbar-csv-1"


# -- CSV ---------------------------------------------------------------------


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_csv(path, columns, rows, meta: dict):
    lines = [f"# {FORMAT_VERSION}"]
    for key in ("config_hash", "noise_checksum", "kind"):
        if key in meta:
            lines.append(f"# {key}={meta[key]}")
    payload = {k: v for k, v in meta.items() if k not in ("config_hash", "noise_checksum", "kind")}
    lines.append("# meta=" + json.dumps(payload, sort_keys=True))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_float(float(v)) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Read back one of our CSVs: (header dict, columns, data array)."""
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
    data = np.array(rows) if rows else np.empty((0, len(columns or ())))
    return header, columns or [], data


# -- single-path work ----------------------------------------------------------


def _setup(cfg: ExperimentConfig):
    basis = cfg.basis()
    return basis, cfg.params(), cfg.family(basis), cfg.scheme_config()


def run_single_path(cfg: ExperimentConfig, path_id: int, keep_states: bool = False,
                    lambda_e: float | None = None):
    """Integrate one ensemble member; returns (rows, noise digest, history?)."""
    basis, params, fam, scheme = _setup(cfg)
    if lambda_e is not None:
        params = replace(params, lambda_e=lambda_e)
    u0 = cfg.initial_field(basis)
    path = NoisePath(seed=cfg.seed, path_id=path_id, dt=cfg.dt, K=cfg.K)
    collector = RecordCollector(params, fam, n=scheme.n)
    sinks = [collector]
    history = StateHistory() if keep_states else None
    if history is not None:
        sinks.append(history)
    final = integrate(u0, scheme, params, fam, path, sinks=sinks)
    return collector, final.noise_digest, history


def _pool_task(args):
    cfg, path_id = args
    collector, digest, _ = run_single_path(cfg, path_id)
    return path_id, collector.rows(), digest


def run_ensemble(cfg: ExperimentConfig, workers: int = 1):
    """All paths, in deterministic path-id order regardless of scheduling.

    Returns a list of (rows, digest) indexed by path id.
    """
    if workers <= 1 or cfg.paths == 1:
        out = []
        for pid in range(cfg.paths):
            collector, digest, _ = run_single_path(cfg, pid)
            out.append((collector.rows(), digest))
        return out
    results = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for pid, rows, digest in pool.map(_pool_task, [(cfg, pid) for pid in range(cfg.paths)]):
            results[pid] = (rows, digest)
    return [results[pid] for pid in range(cfg.paths)]


# -- experiment drivers -----------------------------------------------------------


def _base_meta(cfg: ExperimentConfig, kind: str) -> dict:
    meta = cfg.to_meta()
    meta["columns"] = list(CSV_COLUMNS)
    return {"kind": kind, "config_hash": cfg.config_hash(), **meta}


def trajectory_filename(path_id: int) -> str:
    return f"trajectory_{path_id:03d}.csv"


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Integrate the ensemble and write trajectory_XXX.csv + ensemble.csv."""
    os.makedirs(out_dir, exist_ok=True)
    results = run_ensemble(cfg, workers=workers)
    meta = _base_meta(cfg, "trajectory")
    files = []
    for pid, (rows, digest) in enumerate(results):
        fname = os.path.join(out_dir, trajectory_filename(pid))
        write_csv(fname, CSV_COLUMNS, rows,
                  {**meta, "noise_checksum": digest, "path_id": pid})
        files.append(fname)
    stack = np.stack([rows for rows, _ in results])  # (paths, records, cols)
    t = stack[0, :, 0]
    if not all(np.array_equal(stack[i, :, 0], t) for i in range(len(results))):
        raise RuntimeError("paths disagree on record times")
    cols = ["t"]
    summary = [t]
    for j, name in enumerate(CSV_COLUMNS[1:], start=1):
        cols += [f"mean_{name}", f"sd_{name}"]
        summary.append(stack[:, :, j].mean(axis=0))
        summary.append(stack[:, :, j].std(axis=0, ddof=1) if len(results) > 1
                       else np.zeros_like(t))
    ens = os.path.join(out_dir, "ensemble.csv")
    write_csv(ens, cols, np.column_stack(summary),
              {**_base_meta(cfg, "ensemble"), "n_paths": cfg.paths})
    files.append(ens)
    return {"files": files, "results": results}


def run_decay_test(cfg: ExperimentConfig, out_dir, workers: int = 1):
    """Decay-bound verification run; writes decay_report.csv next to trajectories."""
    basis = cfg.basis()
    require_decay_hypotheses(cfg.params(), cfg.family(basis))
    outcome = run_experiment(cfg, out_dir, workers=workers)
    trajectories = [_rows_to_records(rows) for rows, _ in outcome["results"]]
    fam = cfg.family(basis)
    report = check_pathwise_decay(trajectories, cfg.params(), fam, tol=cfg.decay_tol)
    rows = [(pid, report.max_ratio_per_path[pid],
             float(report.max_ratio_per_path[pid] > 1.0 + report.tol))
            for pid in range(cfg.paths)]
    meta = {**_base_meta(cfg, "decay_report"),
            "violations": report.violations,
            "fitted_rate": report.fitted_rate,
            "tol": report.tol}
    fname = os.path.join(out_dir, "decay_report.csv")
    write_csv(fname, ("path_id", "max_ratio", "violated"), rows, meta)
    outcome["files"].append(fname)
    outcome["report"] = report
    return outcome


def _rows_to_records(rows: np.ndarray):
    from .diagnostics import DiagnosticsRecord

    return [DiagnosticsRecord(*row) for row in rows]


def run_llb_limit(cfg: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Coupled vanishing-exchange sweep vs the second-order limit run.

    Every run (each epsilon and the reference) drives the same increments;
    the written errors are ensemble means over the coupled paths.
    """
    if cfg.dim >= 3:
        raise ValueError("the vanishing-exchange sweep supports d in {1, 2} only")
    for eps in cfg.llb_epsilons:
        if not 0 < eps < cfg.lambda_r:
            raise ValueError(f"epsilon {eps} must lie in (0, lambda_r)")
    os.makedirs(out_dir, exist_ok=True)
    basis = cfg.basis()

    def run_all_paths(lambda_e):
        hists = []
        digests = []
        for pid in range(cfg.paths):
            _, digest, hist = run_single_path(cfg, pid, keep_states=True, lambda_e=lambda_e)
            hists.append(hist)
            digests.append(digest)
        return hists, digests

    reference, ref_digests = run_all_paths(0.0)
    histories = {}
    digests_by_eps = {0.0: ref_digests}
    for eps in cfg.llb_epsilons:
        histories[eps], digests_by_eps[eps] = run_all_paths(eps)
    if len({tuple(v) for v in digests_by_eps.values()}) != 1:
        raise RuntimeError("coupled runs consumed different noise")
    errors = llb_limit_error(histories, reference, basis)
    eps_list = [row["eps"] for row in errors]
    err_list = [row["err_total"] for row in errors]
    slope = loglog_slope(eps_list, err_list)
    rows = [(row["eps"], row["err_sup_l2"], row["err_int_h1"], row["err_total"])
            for row in errors]
    meta = {**_base_meta(cfg, "llb_limit"),
            "noise_checksum": ref_digests[0],
            "loglog_slope": slope,
            "n_paths": cfg.paths}
    fname = os.path.join(out_dir, "llb_limit.csv")
    write_csv(fname, ("eps", "err_sup_l2", "err_int_h1", "err_total"), rows, meta)
    return {"files": [fname], "errors": errors, "slope": slope}
