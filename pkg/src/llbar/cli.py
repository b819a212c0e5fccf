"""Command-line driver.

Subcommands: run <config>, selftest, presets, decay-test <config>,
llb-limit <config>, info.  <config> is a file path or `preset:NAME`.
Exit codes: 0 success, 2 config error, 3 numerical blow-up,
4 selftest or acceptance-check failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .config import ConfigError, dump_config, get_preset, load_config, presets, with_overrides
from .experiment import run_decay_test, run_experiment, run_llb_limit
from .integrator import BlowUpError, HypothesisError
from .selftest import format_report, run_selftest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_CHECK = 4


def _load(spec: str):
    if spec.startswith("preset:"):
        return get_preset(spec[len("preset:"):]), spec[len("preset:"):]
    name = os.path.splitext(os.path.basename(spec))[0]
    return load_config(spec), name


def _out_dir(args, cfg, name: str) -> str:
    if args.out:
        return args.out
    if cfg.out_dir:
        return cfg.out_dir
    root = os.environ.get("LLBAR_OUT", os.path.join(os.getcwd(), "llbar-out"))
    return os.path.join(root, name)


def _add_run_opts(sub):
    sub.add_argument("config", help="config file path or preset:NAME")
    sub.add_argument("--paths", type=int, default=None, help="override ensemble size")
    sub.add_argument("--seed", type=int, default=None, help="override base seed")
    sub.add_argument("--workers", type=int, default=1, help="worker processes")
    sub.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="llbar", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "decay-test", "llb-limit"):
        _add_run_opts(sub.add_parser(name))
    st = sub.add_parser("selftest", help="run the mathematical identity suite")
    st.add_argument("--seed", type=int, default=2024)
    st.add_argument("--fields", type=int, default=20)
    pr = sub.add_parser("presets", help="list named configurations")
    pr.add_argument("--show", default=None, help="print one preset as config text")
    sub.add_parser("info", help="environment and format summary")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            results = run_selftest(seed=args.seed, n_fields=args.fields)
            print(format_report(results))
            return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK

        if args.command == "presets":
            if args.show:
                print(dump_config(get_preset(args.show)), end="")
            else:
                for name, cfg in sorted(presets().items()):
                    print(f"{name:24s} d={cfg.dim} n={max(cfg.cutoff)} K={cfg.K} "
                          f"dt={cfg.dt:g} T={cfg.t_final:g} paths={cfg.paths}")
            return EXIT_OK

        if args.command == "info":
            import numpy
            import scipy

            print(f"llbar {__version__} (numpy {numpy.__version__}, scipy {scipy.__version__})")
            print("output format: llbar-csv-1; trajectory columns:")
            from .diagnostics import CSV_COLUMNS

            print("  " + ",".join(CSV_COLUMNS))
            print("presets: " + ", ".join(sorted(presets())))
            print("exit codes: 0 ok, 2 config error, 3 blow-up, 4 check failure")
            return EXIT_OK

        cfg, name = _load(args.config)
        cfg = with_overrides(cfg, paths=args.paths, seed=args.seed)
        out_dir = _out_dir(args, cfg, name)

        if args.command == "run":
            outcome = run_experiment(cfg, out_dir, workers=args.workers)
            print(f"wrote {len(outcome['files'])} files to {out_dir}")
            return EXIT_OK

        if args.command == "decay-test":
            outcome = run_decay_test(cfg, out_dir, workers=args.workers)
            rep = outcome["report"]
            print(f"mu={rep.mu_theoretical:.6g} tol={rep.tol:g} "
                  f"max_ratio={rep.max_ratio:.6g} violations={rep.violations} "
                  f"fitted_rate={rep.fitted_rate:.6g}")
            print(f"wrote {len(outcome['files'])} files to {out_dir}")
            return EXIT_OK if rep.violations == 0 else EXIT_CHECK

        if args.command == "llb-limit":
            outcome = run_llb_limit(cfg, out_dir, workers=args.workers)
            for row in outcome["errors"]:
                print(f"eps={row['eps']:.3g} err_total={row['err_total']:.6g}")
            print(f"loglog slope {outcome['slope']:.4f}; wrote {out_dir}/llb_limit.csv")
            decreasing = all(a["err_total"] > b["err_total"]
                             for a, b in zip(outcome["errors"], outcome["errors"][1:]))
            return EXIT_OK if decreasing else EXIT_CHECK

        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, HypothesisError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
