"""Command-line driver: ``intradayfts <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import time

import numpy as np

from .config import load_config
from .curves import CIDR, SessionSpec, build_panel, read_panel_csv, read_ticks_csv, to_cidr, write_panel_csv
from .errors import ConfigError, FtsError
from .fpca import FpcaModel
from .intervals import BootstrapConfig, ts_interval, write_band_csv
from .pipeline import fit_decomposition, run_pipeline
from .score_forecast import fit_score_model
from .simulate import Far1Spec, simulate_far1
from .updating import (
    METHODS,
    LambdaSchedule,
    PartialObservation,
    bm_forecast,
    flr_update,
    ols_update,
    pls_update,
    rr_update,
    ts_forecast,
    ts_update,
    tune_lambda,
)


def _session_args(p):
    p.add_argument("--session-open", default=None, help="session open, HH:MM:SS")
    p.add_argument("--session-close", default=None, help="session close, HH:MM:SS")
    p.add_argument("--tick-seconds", type=int, default=None)


def _session(args):
    d = SessionSpec()
    return SessionSpec(time.fromisoformat(args.session_open) if args.session_open else d.open_time,
                       time.fromisoformat(args.session_close) if args.session_close else d.close_time,
                       args.tick_seconds or d.tick_seconds)


def _load_panel(path):
    panel = read_panel_csv(path)
    return panel if panel.scale_tag == CIDR else to_cidr(panel)


def _write_curve(path, grid, values, header="point"):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid_time", header])
        for g, v in zip(grid, values):
            w.writerow([repr(float(g)), repr(float(v))])


def cmd_ingest(args):
    session = _session(args)
    panel = build_panel(read_ticks_csv(args.input, session), session)
    if not args.raw:
        panel = to_cidr(panel)
    write_panel_csv(panel, args.out)


def cmd_simulate(args):
    w = tuple(float(v) for v in args.weights.split(","))
    spec = Far1Spec(n=args.n, m=args.m, kernel_rank=len(w), kernel_weights=w, basis=args.basis,
                    noise_sd=args.noise_sd, seed=args.seed, white_noise_sd=args.white_noise_sd)
    write_panel_csv(simulate_far1(spec), args.out)


def cmd_fit(args):
    panel = _load_panel(args.input)
    X = np.asarray(panel.values)
    if args.head:
        X = X[: args.head]
    model = fit_decomposition(X, args.decomp, args.delta)
    fc = fit_score_model(model.scores, args.score_model)
    doc = {"grid": panel.grid.tolist(), "score_model": args.score_model, "fpca": model.to_dict(),
           "score_fit": fc.to_dict()}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _load_model(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    model = FpcaModel.from_dict(doc["fpca"])
    return doc, model, fit_score_model(model.scores, doc["score_model"])


def cmd_forecast(args):
    doc, model, fc = _load_model(args.model)
    grid = doc["grid"]
    if args.B:
        band = ts_interval(model, fc, BootstrapConfig(args.B, args.alpha, args.seed))
        write_band_csv(band, args.out, grid)
    else:
        _write_curve(args.out, grid, ts_forecast(model, fc))


def _read_partial(path, m0):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith("day_id"):
        row = read_panel_csv(path).values[0]
    else:
        row = np.array([float(v) for v in text.replace("\n", ",").split(",") if v.strip()])
    if m0:
        if m0 > row.size:
            raise ConfigError(f"partial day has only {row.size} values, m0={m0}")
        row = row[:m0]
    return PartialObservation(row)


def cmd_update(args):
    method = args.method.upper()
    if method not in METHODS:
        raise ConfigError(f"unknown method {args.method!r}")
    obs = _read_partial(args.partial, args.m0)
    if method in ("BM", "FLR"):
        if not args.input:
            raise ConfigError(f"{method} needs --input with the historical panel")
        panel = _load_panel(args.input)
        res = (flr_update(panel, obs, args.delta) if method == "FLR"
               else bm_forecast(panel, obs, args.delta, args.score_model))
        grid = panel.grid
    else:
        if args.model:
            doc, model, fc = _load_model(args.model)
            grid = np.asarray(doc["grid"])
        elif args.input:
            panel = _load_panel(args.input)
            model = fit_decomposition(panel.values, args.decomp, args.delta)
            fc = fit_score_model(model.scores, args.score_model)
            grid = panel.grid
        else:
            raise ConfigError(f"{method} needs --model or --input")
        lam = args.lam
        if method in ("RR", "PLS") and lam is None:
            if not args.schedule:
                raise ConfigError(f"{method} needs --lambda or --schedule")
            with open(args.schedule, encoding="utf-8") as fh:
                lam = LambdaSchedule.from_json(fh.read()).lambda_for(obs.m0)
        if method == "TS":
            res = ts_update(model, fc, obs.m0)
        elif method == "OLS":
            res = ols_update(model, obs)
        elif method == "RR":
            res = rr_update(model, obs, lam)
        else:
            res = pls_update(model, obs, fc.forecast(1).point[0], lam)
    _write_curve(args.out, np.asarray(grid)[obs.m0:], res.remainder, "remainder")


def cmd_tune(args):
    panel = _load_panel(args.input)
    grid = [float(v) for v in args.lambda_grid.split(",")] if args.lambda_grid else None
    blocks = [int(v) for v in args.m0_blocks.split(",")] if args.m0_blocks else None
    kw = {} if grid is None else {"grid": grid}
    sched = tune_lambda(panel, args.method, m0_blocks=blocks, score_model=args.score_model, delta=args.delta, **kw)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(sched.to_json() + "\n")


EVAL_FLAGS = ("input", "decomp", "score_model", "delta", "updaters", "lambda_grid", "splits", "B", "alpha",
              "seed", "out", "m0_blocks", "max_test_days")


def cmd_evaluate(args):
    flags = {k: getattr(args, k) for k in EVAL_FLAGS}
    if args.simulate:
        flags["simulate"] = True
    if args.full_updating:
        flags["full_updating"] = True
    if args.no_bands:
        flags["bands"] = False
    for key in ("sim_n", "sim_m", "sim_seed"):
        if getattr(args, key) is not None:
            flags[key] = getattr(args, key)
    cfg = load_config(args.config, flags)
    paths = run_pipeline(cfg)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intradayfts", description="Intraday functional time series forecasting.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ticks CSV -> panel CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--raw", action="store_true", help="keep raw levels instead of CIDR")
    _session_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="FAR(1) panel CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=125)
    p.add_argument("--m", type=int, default=101)
    p.add_argument("--weights", default="0.7,0.2")
    p.add_argument("--basis", default="fourier", choices=["fourier", "polynomial"])
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--white-noise-sd", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="panel CSV -> model JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--decomp", default="fpca", choices=["fpca", "robust_fpca", "robrsvd"])
    p.add_argument("--score-model", default="arima", choices=["arima", "var"])
    p.add_argument("--delta", type=float, default=0.9)
    p.add_argument("--head", type=int, default=0, help="fit on the first N days only")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="model JSON -> next-day curve CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--B", type=int, default=0, help="add a bootstrap band with B replicates")
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("update", help="partial day -> remainder CSV")
    p.add_argument("--method", required=True)
    p.add_argument("--partial", required=True, help="panel CSV (first row used) or comma-separated values")
    p.add_argument("--m0", type=int, default=0, help="use only the first m0 values of the partial day")
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--schedule")
    p.add_argument("--decomp", default="fpca", choices=["fpca", "robust_fpca", "robrsvd"])
    p.add_argument("--score-model", default="arima", choices=["arima", "var"])
    p.add_argument("--delta", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("tune", help="panel CSV -> lambda schedule JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=["RR", "PLS", "rr", "pls"])
    p.add_argument("--lambda-grid")
    p.add_argument("--m0-blocks")
    p.add_argument("--score-model", default="arima", choices=["arima", "var"])
    p.add_argument("--delta", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="expanding-window evaluation with reports")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--input")
    p.add_argument("--simulate", action="store_true")
    p.add_argument("--sim-n", type=int)
    p.add_argument("--sim-m", type=int)
    p.add_argument("--sim-seed", type=int)
    p.add_argument("--decomp")
    p.add_argument("--score-model")
    p.add_argument("--delta")
    p.add_argument("--updaters", help="comma-separated subset of TS,BM,OLS,RR,PLS,FLR")
    p.add_argument("--lambda-grid")
    p.add_argument("--splits", help="train,validation,test sizes, e.g. 43,42,40")
    p.add_argument("--B")
    p.add_argument("--alpha")
    p.add_argument("--seed")
    p.add_argument("--out")
    p.add_argument("--m0-blocks")
    p.add_argument("--max-test-days")
    p.add_argument("--full-updating", action="store_true")
    p.add_argument("--no-bands", action="store_true")
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (FtsError, ValueError, OSError) as exc:
        print(f"intradayfts {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
