"""Command-line front end.

Subcommands: ingest, sweep, train, predict, backtest, compare, analyze.
Tabular outputs are CSV files with a fixed column order; ``--format json``
adds JSON mirrors of the same tables and switches the stdout summary to a
JSON object. Exit code 0 means every requested cell succeeded; a sweep with
failed cells exits 1 unless ``--allow-partial`` is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .diurnal import monthly_diurnal_strength, windowed_autocorrelation
from .errors import WindcastError
from .evaluate import delta_nrmse, report_from_dict, report_to_dict
from .figures import backtest_timeline, diurnal_profile, render_sweep_figures
from .forecaster import (
    ModelConfig,
    ModelKind,
    fit_forecaster,
    load_forecaster,
    save_forecaster,
)
from .kernel_model import KernelParams
from .lagset import Design, DesignSpec, build, feature_rows
from .rolling import UpdatePolicy, run_backtest
from .select import Grid, grid_search, write_cv_csv
from .series import (
    ColumnSchema,
    _parse_timestamp,
    parse_csv,
    read_series_csv,
    resample_hourly,
    write_series_csv,
)
from .sweep import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    global_local_gaps,
    run_sweep,
    select_globally_best,
    write_sweep_csv,
)


def _instant(text: str) -> datetime:
    try:
        return _parse_timestamp(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"not a comma-separated float list: {text!r}"
        )


def _design_list(text: str) -> tuple[Design, ...]:
    try:
        return tuple(Design(part) for part in text.split(","))
    except ValueError:
        choices = ", ".join(d.value for d in Design)
        raise argparse.ArgumentTypeError(f"designs must be among: {choices}")


def _model_list(text: str) -> tuple[ModelKind, ...]:
    try:
        return tuple(ModelKind(part) for part in text.split(","))
    except ValueError:
        choices = ", ".join(m.value for m in ModelKind)
        raise argparse.ArgumentTypeError(f"models must be among: {choices}")


def _station_list(text: str) -> tuple[tuple[str, str], ...]:
    pairs = []
    for part in text.split(","):
        ident, sep, path = part.partition("=")
        if not sep or not ident or not path:
            raise argparse.ArgumentTypeError(
                f"stations must be id=path pairs, got {part!r}"
            )
        pairs.append((ident, path))
    return tuple(pairs)


def _emit(summary: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(summary, indent=2, default=str))
    else:
        for key, value in summary.items():
            print(f"{key}: {value}")


def _write_table(path: Path, header: Sequence[str], rows: Sequence[Sequence],
                 fmt: str) -> None:
    """CSV always; a JSON mirror (list of row objects) next to it on demand."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    if fmt == "json":
        mirror = [dict(zip(header, row)) for row in rows]
        path.with_suffix(".json").write_text(
            json.dumps(mirror, indent=2, default=str), encoding="utf-8"
        )


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def _cmd_ingest(args: argparse.Namespace) -> int:
    schema = ColumnSchema(time=args.col_time, speed=args.col_speed,
                          direction=args.col_dir)
    observations, report = parse_csv(args.raw, schema)
    series = resample_hourly(
        observations, max_gap=timedelta(minutes=args.max_gap_minutes)
    )
    write_series_csv(series, args.output)
    if args.issues and report.issues:
        with open(args.issues, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "code", "reason"])
            for issue in report.issues:
                writer.writerow([issue.row, issue.code, issue.reason])
    by_code: dict[str, int] = {}
    for code in report.codes():
        by_code[code] = by_code.get(code, 0) + 1
    gaps = int(series.gap_mask.sum())
    _emit({
        "observations": len(observations),
        "rejected_rows": len(report.issues),
        "rejected_by_code": by_code,
        "slots": series.n_slots,
        "gap_slots": gaps,
        "start": series.start.isoformat(),
        "output": str(args.output),
    }, args.format)
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _merged_config(args: argparse.Namespace) -> ExperimentConfig:
    payload: dict = {}
    if args.config:
        payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    overrides = {
        "stations": ([list(p) for p in args.stations]
                     if args.stations else None),
        "cutoff": args.cutoff.isoformat() if args.cutoff else None,
        "horizons": args.horizons,
        "memories": args.memories,
        "designs": [d.value for d in args.designs] if args.designs else None,
        "models": [m.value for m in args.models] if args.models else None,
        "seed": args.seed,
        "output_dir": args.output_dir,
        "m": args.m,
        "refine_factor": args.refine_factor,
        "cv_folds": args.cv_folds,
        "max_workers": args.max_workers,
    }
    for key, value in overrides.items():
        if value is not None:
            payload[key] = value
    if args.grid_sigma or args.grid_lambda:
        if not (args.grid_sigma and args.grid_lambda):
            raise WindcastError("--grid-sigma and --grid-lambda go together")
        payload["grid"] = {"sigma": list(args.grid_sigma),
                           "lambda": list(args.grid_lambda)}
    if "stations" not in payload:
        raise WindcastError("no stations configured (file or --stations)")
    if "cutoff" not in payload:
        raise WindcastError("no cutoff configured (file or --cutoff)")
    return config_from_dict(payload)


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _merged_config(args)
    if not config.output_dir:
        raise WindcastError("no output_dir configured (file or --output-dir)")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    # provenance: the exact settings this run resolved to
    (out / "resolved_config.json").write_text(
        json.dumps(config_to_dict(config), indent=2), encoding="utf-8"
    )

    result = run_sweep(config)
    write_sweep_csv(result, out / "sweep.csv")
    if args.format == "json":
        rows = [dict(zip(
            ("station", "design", "model", "horizon", "memory", "nrmse",
             "rmse", "gamma_rmse", "sigma", "lambda", "n_predictions",
             "eval_fingerprint", "status"),
            (r.station, r.design.value, r.model.value, r.horizon, r.memory,
             r.nrmse, r.rmse, r.gamma_rmse,
             r.params.sigma if r.params else None,
             r.params.lam if r.params else None,
             r.n_predictions, r.eval_fingerprint, r.status),
        )) for r in result.rows]
        (out / "sweep.json").write_text(
            json.dumps(rows, indent=2, default=str), encoding="utf-8"
        )

    local = result.locally_best()
    _write_table(
        out / "locally_best.csv",
        ["station", "horizon", "design", "model", "memory", "nrmse", "rmse",
         "gamma_rmse"],
        [[row.station, h, row.design.value, row.model.value, row.memory,
          row.nrmse, row.rmse, row.gamma_rmse]
         for (station, h), row in sorted(local.items())],
        args.format,
    )

    global_rows = []
    gap_rows = []
    for horizon in config.horizons:
        try:
            choice = select_globally_best(result, horizon)
        except WindcastError:
            continue
        global_rows.append([horizon, choice.design.value, choice.model.value,
                            choice.memory, choice.count, choice.mean_nrmse])
        for station, gap in global_local_gaps(result, horizon, choice):
            gap_rows.append([horizon, station, gap])
    _write_table(out / "globally_best.csv",
                 ["horizon", "design", "model", "memory", "count",
                  "mean_nrmse"],
                 global_rows, args.format)
    _write_table(out / "global_vs_local.csv",
                 ["horizon", "station", "delta_nrmse"], gap_rows, args.format)

    figure_paths: list[str] = []
    if args.figures and result.ok_rows():
        figure_paths = [str(p) for p in
                        render_sweep_figures(result, out / "figures")]

    failed = result.failed_rows()
    _emit({
        "cells": len(result.rows),
        "ok": len(result.ok_rows()),
        "failed": len(failed),
        "output_dir": str(out),
        "figures": figure_paths,
    }, args.format)
    for row in failed[:20]:
        print(f"failed cell: {row.station} {row.design.value} "
              f"{row.model.value} h={row.horizon} mu={row.memory}: "
              f"{row.status}", file=sys.stderr)
    if failed and len(failed) > 20:
        print(f"... and {len(failed) - 20} more", file=sys.stderr)
    if failed and not args.allow_partial:
        return 1
    return 0


# ---------------------------------------------------------------------------
# train / predict
# ---------------------------------------------------------------------------

def _model_config_from_args(args: argparse.Namespace) -> ModelConfig:
    params = None
    if args.sigma is not None or getattr(args, "lam", None) is not None:
        if args.sigma is None or args.lam is None:
            raise WindcastError("--sigma and --lambda go together")
        params = KernelParams(args.sigma, args.lam)
    return ModelConfig(
        kind=ModelKind(args.model),
        params=params,
        m=args.m,
        seed=args.seed,
        ridge=getattr(args, "ridge", None),
    )


def _grid_from_args(args: argparse.Namespace) -> Optional[Grid]:
    if args.grid_sigma or args.grid_lambda:
        if not (args.grid_sigma and args.grid_lambda):
            raise WindcastError("--grid-sigma and --grid-lambda go together")
        return Grid(args.grid_sigma, args.grid_lambda)
    return None


def _cmd_train(args: argparse.Namespace) -> int:
    series = read_series_csv(args.series)
    spec = DesignSpec(Design(args.design), args.horizon, args.memory)
    dataset = build(series, spec)
    if args.train_before is not None:
        targets = dataset.target_instants()
        keep = np.array([i for i, t in enumerate(targets)
                         if t < args.train_before], dtype=np.intp)
        dataset = dataset.take(keep)

    config = _model_config_from_args(args)
    summary: dict = {
        "rows": dataset.n,
        "design": spec.design.value,
        "horizon": spec.horizon,
        "memory": spec.memory,
        "model": config.kind.value,
    }
    if config.kind is ModelKind.KRR and config.params is None:
        cv = grid_search(dataset, _grid_from_args(args), config.fitter(),
                         args.refine_factor, args.cv_folds)
        config = config.with_params(cv.best)
        summary["sigma"] = cv.best.sigma
        summary["lambda"] = cv.best.lam
        summary["cv_r2"] = cv.best_row().mean_r2
        if args.cv_table:
            write_cv_csv(cv, args.cv_table)
    elif config.params is not None:
        summary["sigma"] = config.params.sigma
        summary["lambda"] = config.params.lam

    forecaster = fit_forecaster(dataset, config)
    save_forecaster(forecaster, args.output)
    summary["output"] = str(args.output)
    _emit(summary, args.format)
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    forecaster = load_forecaster(args.model_file)
    series = read_series_csv(args.series)
    X, anchors = feature_rows(series, forecaster.spec)
    lead = timedelta(hours=forecaster.spec.horizon)
    targets = [a + lead for a in anchors]
    keep = [i for i, t in enumerate(targets)
            if (args.since is None or t >= args.since)
            and (args.until is None or t < args.until)]
    if not keep:
        raise WindcastError("no predictable instants in the requested range")
    y_pred = forecaster.predict_speed(X[np.array(keep, dtype=np.intp)])

    rows = []
    grid_end = series.instant_at(series.n_slots - 1)
    for j, i in enumerate(keep):
        target = targets[i]
        actual = ""
        if series.start <= target <= grid_end:
            value = series.s[series.index_of(target)]
            if not np.isnan(value):
                actual = repr(float(value))
        rows.append([target.isoformat(), repr(float(y_pred[j])), actual])

    header = ["target", "prediction", "actual"]
    if args.output:
        _write_table(Path(args.output), header, rows, args.format)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    return 0


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------

def _policy_from_args(args: argparse.Namespace) -> UpdatePolicy:
    kind = args.policy
    if kind == "static":
        return UpdatePolicy.static()
    if kind == "online":
        return UpdatePolicy.online(args.train_size, args.retrain_period)
    if kind == "incremental":
        return UpdatePolicy.incremental(args.retrain_period)
    if args.train_size is not None:
        return UpdatePolicy.online_short(args.train_size, args.retrain_period)
    return UpdatePolicy.online_short(retrain_period=args.retrain_period)


def _cmd_backtest(args: argparse.Namespace) -> int:
    series = read_series_csv(args.series)
    spec = DesignSpec(Design(args.design), args.horizon, args.memory)
    config = _model_config_from_args(args)
    policy = _policy_from_args(args)
    report = run_backtest(
        series, spec, config, policy, args.cutoff,
        station_id=args.station_id, grid=_grid_from_args(args),
        retune_each_window=args.retune_each_window, cv_folds=args.cv_folds,
    )

    summary = {
        "nrmse": report.metrics.nrmse,
        "rmse": report.metrics.rmse,
        "n_predictions": report.metrics.n_predictions,
        "retrain_count": report.retrain_count,
        "policy": policy.kind.value,
    }
    if isinstance(report.params_used, KernelParams):
        summary["sigma"] = report.params_used.sigma
        summary["lambda"] = report.params_used.lam

    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_table(
            out / "predictions.csv", ["target", "y_true", "y_pred"],
            [[p.instant.isoformat(), repr(p.y_true), repr(p.y_pred)]
             for p in report.predictions],
            args.format,
        )
        _write_table(
            out / "windows.csv",
            ["boundary", "train_rows", "first_prediction", "n_predictions"],
            [[w.boundary.isoformat(), w.train_rows,
              report.predictions[w.first_prediction].instant.isoformat(),
              w.n_predictions]
             for w in report.windows],
            args.format,
        )
        metrics = report_to_dict(report.metrics)
        metrics["retrain_count"] = report.retrain_count
        metrics["policy"] = policy.kind.value
        if isinstance(report.params_used, KernelParams):
            metrics["sigma"] = report.params_used.sigma
            metrics["lambda"] = report.params_used.lam
        (out / "metrics.json").write_text(
            json.dumps(metrics, indent=2), encoding="utf-8"
        )
        if args.figures:
            backtest_timeline(report, out / "backtest.png")
        summary["output_dir"] = str(out)
    _emit(summary, args.format)
    return 0


# ---------------------------------------------------------------------------
# compare / analyze
# ---------------------------------------------------------------------------

def _cmd_compare(args: argparse.Namespace) -> int:
    report_a = report_from_dict(
        json.loads(Path(args.report_a).read_text(encoding="utf-8")))
    report_b = report_from_dict(
        json.loads(Path(args.report_b).read_text(encoding="utf-8")))
    delta = delta_nrmse(report_a, report_b)
    _emit({
        "nrmse_a": report_a.nrmse,
        "nrmse_b": report_b.nrmse,
        "delta_nrmse": delta,
        "model_a": report_a.model,
        "model_b": report_b.model,
        "better": ("a" if delta < 0 else "b" if delta > 0 else "tie"),
    }, args.format)
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    series = read_series_csv(args.series)
    values = windowed_autocorrelation(series, lag=args.lag,
                                      window=args.window)
    months = monthly_diurnal_strength(series, lag=args.lag,
                                      window=args.window)
    summary = {
        "windows_used": len(values),
        "months": len(months),
        "lag_hours": args.lag,
        "window_hours": args.window,
    }
    month_rows = [[m.month, repr(m.r_ss_24), m.windows_used] for m in months]
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_table(out / "monthly.csv",
                     ["month", "autocorrelation", "windows"],
                     month_rows, args.format)
        _write_table(out / "windows.csv",
                     ["window_start", "autocorrelation", "pairs"],
                     [[v.start.isoformat(), repr(v.value), v.n_pairs]
                      for v in values],
                     args.format)
        if args.figures:
            diurnal_profile(months, out / "diurnal.png")
        summary["output_dir"] = str(out)
        _emit(summary, args.format)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(["month", "autocorrelation", "windows"])
        writer.writerows(month_rows)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="stdout summary and table mirror format")


def _add_figures(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--figures", dest="figures", action="store_true",
                       default=True, help="render PNG figures (default)")
    group.add_argument("--no-figures", dest="figures", action="store_false")


def _add_model_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=("krr", "linear"), default="krr")
    parser.add_argument("--sigma", type=float,
                        help="kernel width; skips the grid search")
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="ridge strength; skips the grid search")
    parser.add_argument("--m", type=int,
                        help="number of kernel centers (default 10*sqrt(n))")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--ridge", type=float,
                        help="linear model ridge (default: automatic)")
    parser.add_argument("--grid-sigma", type=_float_list)
    parser.add_argument("--grid-lambda", type=_float_list)
    parser.add_argument("--cv-folds", type=int, default=5)
    parser.add_argument("--refine-factor", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windcast",
        description="Hourly wind-speed forecasting from lagged observations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest",
                       help="resample a raw observation CSV onto the hourly grid")
    p.add_argument("raw", help="raw CSV with timestamp, speed, direction")
    p.add_argument("-o", "--output", required=True,
                   help="canonical series CSV to write")
    p.add_argument("--col-time", default="timestamp")
    p.add_argument("--col-speed", default="speed")
    p.add_argument("--col-dir", default="direction")
    p.add_argument("--max-gap-minutes", type=int, default=60,
                   help="slot becomes a gap if no observation this close")
    p.add_argument("--issues", help="write rejected-row report here")
    _add_format(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("sweep", help="run the full design/model/horizon grid")
    p.add_argument("--config", help="JSON experiment description")
    p.add_argument("--stations", type=_station_list,
                   help="comma-separated id=path pairs")
    p.add_argument("--cutoff", type=_instant)
    p.add_argument("--horizons", type=_int_list)
    p.add_argument("--memories", type=_int_list)
    p.add_argument("--designs", type=_design_list)
    p.add_argument("--models", type=_model_list)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--m", type=int)
    p.add_argument("--grid-sigma", type=_float_list)
    p.add_argument("--grid-lambda", type=_float_list)
    p.add_argument("--cv-folds", type=int)
    p.add_argument("--refine-factor", type=int)
    p.add_argument("--max-workers", type=int)
    p.add_argument("--allow-partial", action="store_true",
                   help="exit 0 even when some cells failed")
    _add_figures(p)
    _add_format(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("train", help="fit one forecaster and save it")
    p.add_argument("series", help="canonical series CSV")
    p.add_argument("-o", "--output", required=True, help="model JSON to write")
    p.add_argument("--design", choices=[d.value for d in Design],
                   required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--memory", type=int, required=True)
    p.add_argument("--train-before", type=_instant,
                   help="use only rows whose target precedes this instant")
    p.add_argument("--cv-table", help="write the grid-search table here")
    _add_model_options(p)
    _add_format(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="apply a saved forecaster to a series")
    p.add_argument("model_file", help="model JSON from `train`")
    p.add_argument("series", help="canonical series CSV")
    p.add_argument("-o", "--output", help="prediction CSV (default: stdout)")
    p.add_argument("--since", type=_instant,
                   help="first target instant to include")
    p.add_argument("--until", type=_instant,
                   help="first target instant to exclude")
    _add_format(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("backtest",
                       help="walk the post-cutoff period under a retraining policy")
    p.add_argument("series", help="canonical series CSV")
    p.add_argument("--design", choices=[d.value for d in Design],
                   required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--memory", type=int, required=True)
    p.add_argument("--cutoff", type=_instant, required=True)
    p.add_argument("--policy",
                   choices=("static", "online", "incremental", "online-short"),
                   default="static")
    p.add_argument("--train-size", type=int)
    p.add_argument("--retrain-period", type=int, default=168)
    p.add_argument("--retune-each-window", action="store_true")
    p.add_argument("--station-id", default="")
    p.add_argument("-o", "--output-dir",
                   help="write predictions, windows, metrics and figure here")
    _add_model_options(p)
    _add_figures(p)
    _add_format(p)
    p.set_defaults(func=_cmd_backtest)

    p = sub.add_parser("compare",
                       help="difference two metrics.json files from `backtest`")
    p.add_argument("report_a")
    p.add_argument("report_b")
    _add_format(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("analyze",
                       help="day-scale autocorrelation profile of a series")
    p.add_argument("series", help="canonical series CSV")
    p.add_argument("-o", "--output-dir")
    p.add_argument("--lag", type=int, default=24)
    p.add_argument("--window", type=int, default=120)
    _add_figures(p)
    _add_format(p)
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WindcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
