#!/usr/bin/env python3
"""
Command-line interface for the H1 diffusion toolkit.
Simulates panels, fits the process with the firefly algorithm, runs replication
studies and the real-data grid workflow.
"""

import argparse
import json
import logging
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

import h1_curve
from estimator import (best_cell, derive_seed, fit, fit_grid, fitted_mean_error, grid_frame,
                       refit_best, replicate_study)
from h1_errors import ConfigError, H1FlowError
from h1_process import PathPanel, mean_fn, panel_mean, simulate, variance_fn
from panel_utils import PANEL_FORMATS, ingest_panel, plot_series, write_frame, write_json, write_panel
from run_config import (FireflyConfigModel, GridSpecModel, ProcessParamsModel, StudySpecModel,
                        load_model, parse_grid, resolve_seed)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

EPILOG = """
Examples:
  python h1flow_cli.py simulate --params configs/study1_params.json --grid 0:50:0.1 --paths 30 --seed 7 --out panel.csv
  python h1flow_cli.py fit --panel panel.csv --fa configs/fa_default.json --seed 7 --out fit.json --trace trace.csv
  python h1flow_cli.py replicate --study configs/study1.json --out tables/ --threads 4
  python h1flow_cli.py curve --params configs/study1_params.json --grid 0:50:0.1 --out mean.csv --svg mean.svg
  python h1flow_cli.py realdata --panel fluorescence.csv --grid configs/realdata_grid.json --out realdata/
  python h1flow_cli.py fit --panel panel.csv --out fit.json --log-file fit.log
"""


def _summary_path(output: Path) -> Path:
    return output.with_name(f"{output.stem}_summary.json")


def _run_info(started: float) -> Dict:
    return {
        "duration": round(time.perf_counter() - started, 3),
        "timestamp": datetime.now().isoformat(timespec="seconds"),
    }


def cmd_simulate(args) -> int:
    params = load_model(args.params, ProcessParamsModel)
    p, init = params.to_h1_params(), params.to_initial_law()
    times = parse_grid(args.grid)
    seed = resolve_seed(args.seed)

    panel = simulate(p, init, times, args.paths, seed=seed, n_workers=args.threads)
    out = write_panel(panel, args.out, args.format)
    print(f"✓ {panel.d} path(s) x {times.size} points saved to: {out}")

    if args.svg:
        plot_series(args.svg, times, {"mean function": mean_fn(p, init, times)},
                    title=f"Simulated H1 paths (seed {seed})", background=panel.value_matrix())
        print(f"✓ Plot saved to: {args.svg}")
    return 0


def cmd_fit(args) -> int:
    started = time.perf_counter()
    panel = ingest_panel(args.panel, args.format)
    fa = load_model(args.fa, FireflyConfigModel) if args.fa else FireflyConfigModel()
    seed = resolve_seed(args.seed)

    result = fit(panel, fa.to_config(seed), initial=args.initial)
    payload = result.to_dict()
    payload["panel"] = {"paths": panel.d, "observations": panel.n_obs, "t1": panel.t1}
    if panel.shared_grid() is not None:
        payload["fitted_mean_error"] = fitted_mean_error(panel, result)

    out = Path(args.out)
    write_json(out, payload)
    print(f"✓ Estimates saved to: {out}")
    if result.sigma1_sq_hat == 0.0:
        print("  Note: degenerate initial law (sigma1^2 = 0)")

    if args.trace:
        write_frame(args.trace, result.trace_frame())
        print(f"✓ Trace saved to: {args.trace}")

    summary = {"panel": str(args.panel), "seed": seed, "fit_duration": round(result.duration, 3)}
    summary.update(_run_info(started))
    write_json(_summary_path(out), summary)

    for name, value in result.estimates().items():
        print(f"  {name:>8}: {value:.7g}")
    print(f"  f_o     : {result.fo_value:.6f}")
    return 0


def cmd_replicate(args) -> int:
    started = time.perf_counter()
    study = load_model(args.study, StudySpecModel)
    spec = study.to_spec(resolve_seed(args.seed))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = replicate_study(spec, n_workers=args.threads)
    write_frame(out_dir / "records.csv", result.records)
    for name, table in result.tables.items():
        write_frame(out_dir / f"table_{name}.csv", table, index=name != "parameters")
        print(f"✓ Table '{name}' saved to: {out_dir / f'table_{name}.csv'}")

    means = result.records[["err_lambda", "err_mu", "err_eta", "err_sigma", "fo_error"]].mean()
    summary = {
        "study": str(args.study),
        "seed": spec.seed,
        "cells": len(spec.cells()),
        "replications": spec.replications,
        "fits": len(result.records),
        "mean_errors": {name: float(value) for name, value in means.items()},
        "tables": sorted(result.tables),
    }
    summary.update(_run_info(started))
    write_json(out_dir / "summary.json", summary)
    print(f"\nReplication study completed: {summary['fits']} fit(s) in {summary['duration']:.1f}s")
    return 0


def _observed_on(panel: PathPanel, times: np.ndarray) -> np.ndarray:
    grid, observed = panel_mean(panel)
    if grid.shape != times.shape or not np.allclose(grid, times, rtol=0, atol=1e-9):
        raise ConfigError("The --grid does not match the panel's observation grid")
    return observed


def cmd_curve(args) -> int:
    params = load_model(args.params, ProcessParamsModel)
    p, init = params.to_h1_params(), params.to_initial_law()
    panel = ingest_panel(args.panel, args.format) if args.panel else None
    if args.grid:
        times = parse_grid(args.grid)
    elif panel is not None:
        times, _ = panel_mean(panel)
    else:
        raise ConfigError("curve needs --grid or --panel")

    mean = mean_fn(p, init, times)
    frame = pd.DataFrame({"t": times, "mean": mean, "variance": variance_fn(p, init, times)})
    series = {"mean function": mean}
    if panel is not None:
        frame["observed_mean"] = _observed_on(panel, times)
        series = {"observed mean": frame["observed_mean"].to_numpy(), **series}

    write_frame(args.out, frame)
    print(f"✓ Mean function saved to: {args.out}")
    if args.svg:
        plot_series(args.svg, times, series, title="H1 mean function")
        print(f"✓ Plot saved to: {args.svg}")

    roots = h1_curve.inflection_times(p.curve, (float(times[0]), float(times[-1])))
    print(f"  Asymptote: {h1_curve.asymptote(p.curve):.7g}")
    print(f"  Inflection time(s): {', '.join(f'{t:.6g}' for t in roots) or 'none in window'}")
    return 0


def cmd_realdata(args) -> int:
    started = time.perf_counter()
    panel = ingest_panel(args.panel, args.format)
    grid_spec = load_model(args.grid, GridSpecModel) if args.grid else GridSpecModel()
    seed = resolve_seed(args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    print(f"Scanning {len(grid_spec.alphas) * len(grid_spec.gammas) * len(grid_spec.deltas)} "
          f"firefly settings on {panel.d} path(s)...")
    cells = fit_grid(panel, alphas=grid_spec.alphas, gammas=grid_spec.gammas, deltas=grid_spec.deltas,
                     n=grid_spec.n, generations=grid_spec.generations, beta0=grid_spec.beta0,
                     seed=seed, initial="mean", n_workers=args.threads)
    write_frame(out_dir / "grid.csv", grid_frame(cells))
    best = best_cell(cells)
    print(f"✓ Grid saved; best cell alpha={best.alpha}, gamma={best.gamma}, delta={best.delta} "
          f"(error {best.error:.5f})")

    result = refit_best(panel, cells, n_fireflies=grid_spec.refit_n, seed=seed, initial="mean")
    times, observed = panel_mean(panel)
    fitted = mean_fn(result.h1_params, result.initial_law, times)
    simulated = simulate(result.h1_params, result.initial_law, times, panel.d,
                         seed=derive_seed(seed, "realdata", "simulate"), n_workers=args.threads)

    payload = result.to_dict()
    payload["fitted_mean_error"] = fitted_mean_error(panel, result)
    payload["best_grid_cell"] = {"alpha": best.alpha, "gamma": best.gamma, "delta": best.delta,
                                 "error": best.error}
    write_json(out_dir / "fit.json", payload)
    write_frame(out_dir / "trace.csv", result.trace_frame())
    write_frame(out_dir / "mean.csv", pd.DataFrame({
        "t": times,
        "observed_mean": observed,
        "fitted_mean": fitted,
        "simulated_mean": simulated.value_matrix().mean(axis=0),
    }))
    plot_series(out_dir / "mean.svg", times, {
        "observed mean": observed,
        "fitted mean": fitted,
        "mean of simulated paths": simulated.value_matrix().mean(axis=0),
    }, title="Observed and fitted mean", background=panel.value_matrix())

    summary = {"panel": str(args.panel), "seed": seed, "grid_cells": len(cells)}
    summary.update(_run_info(started))
    write_json(out_dir / "summary.json", summary)

    print(f"✓ Refit saved to: {out_dir / 'fit.json'}")
    print(f"  fitted-mean error: {payload['fitted_mean_error']:.5f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="Random seed (default: $H1FLOW_SEED, else 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="Maximum number of worker threads (default: 1)")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true",
                           help="No log output; on failure stderr holds only the JSON error")
    common.add_argument("--log-file", help="Write log messages to this file instead of stderr")

    panel_format = argparse.ArgumentParser(add_help=False)
    panel_format.add_argument("--format", choices=PANEL_FORMATS, default="wide",
                              help="Panel CSV layout (default: wide)")

    parser = argparse.ArgumentParser(
        description="Simulate and estimate the hyperbolastic type-I (H1) diffusion process",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, panel_format], help="Simulate sample paths")
    p.add_argument("--params", required=True, help="Process parameters JSON")
    p.add_argument("--grid", required=True, help="Observation grid start:end:step")
    p.add_argument("--paths", type=int, required=True, help="Number of sample paths")
    p.add_argument("--out", "-o", required=True, help="Output panel CSV")
    p.add_argument("--svg", help="Optional plot of the simulated paths")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common, panel_format], help="Fit the process to a panel")
    p.add_argument("--panel", required=True, help="Panel CSV")
    p.add_argument("--fa", help="Firefly configuration JSON (default: n=40, 80 generations)")
    p.add_argument("--initial", choices=["mle", "mean"], default="mle",
                   help="Initial law used for mean predictions (default: mle)")
    p.add_argument("--out", "-o", required=True, help="Output fit JSON")
    p.add_argument("--trace", help="Optional per-generation trace CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("replicate", parents=[common], help="Run a replication study")
    p.add_argument("--study", required=True, help="Study specification JSON")
    p.add_argument("--out", "-o", required=True, help="Output directory for the tables")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("curve", parents=[common, panel_format], help="Evaluate the mean function")
    p.add_argument("--params", required=True, help="Process parameters JSON")
    p.add_argument("--grid", help="Evaluation grid start:end:step (default: the panel grid)")
    p.add_argument("--panel", help="Optional panel whose cross-path mean is added")
    p.add_argument("--out", "-o", required=True, help="Output CSV")
    p.add_argument("--svg", help="Optional SVG line plot")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("realdata", parents=[common, panel_format],
                       help="Grid-scan firefly settings on an observed panel and refit the best")
    p.add_argument("--panel", required=True, help="Observed panel CSV")
    p.add_argument("--grid", help="Firefly grid JSON (default: the built-in grid)")
    p.add_argument("--out", "-o", required=True, help="Output directory")
    p.set_defaults(func=cmd_realdata)
    return parser


def _log_handler(args: argparse.Namespace) -> logging.Handler:
    """Root handler for this run: the log file, nothing with --quiet, else stderr."""
    if args.log_file:
        handler = logging.FileHandler(args.log_file, encoding="utf-8")
    elif args.quiet:
        handler = logging.NullHandler()
    else:
        handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    root.addHandler(handler)
    return handler


def _report(error: Dict) -> None:
    print(json.dumps(error, ensure_ascii=False), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI and return its exit code.

    On failure the last stderr line is the JSON error document. With --quiet
    or --log-file it is the only thing written to stderr.
    """
    args = build_parser().parse_args(argv)
    root = logging.getLogger()
    previous_level = root.level
    if args.threads < 1:
        args.threads = 1
    try:
        handler = _log_handler(args)
    except OSError as e:
        error = ConfigError(f"Cannot open log file {args.log_file}: {e}")
        _report(error.to_dict())
        return error.exit_code

    try:
        return args.func(args)
    except H1FlowError as e:
        logger.error(f"{args.command} failed: {e}")
        _report(e.to_dict())
        return e.exit_code
    except OSError as e:
        error = ConfigError(f"{e.__class__.__name__}: {e}")
        logger.error(f"{args.command} failed: {error}")
        _report(error.to_dict())
        return error.exit_code
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}")
        _report({"error": e.__class__.__name__, "message": str(e), "exit_code": 1})
        return 1
    finally:
        root.removeHandler(handler)
        root.setLevel(previous_level)
        handler.close()


if __name__ == "__main__":
    sys.exit(main())
