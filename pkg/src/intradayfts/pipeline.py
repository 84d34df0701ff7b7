"""Expanding-window evaluation of the TS forecast and the intraday updaters."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .config import ExperimentConfig
from .curves import CIDR, CurvePanel, read_panel_csv, to_cidr
from .errors import SingularDesign
from .fpca import fit_fpca
from .intervals import bm_interval, flr_interval, pls_interval, ts_interval
from .robust import fit_robrsvd, fit_robust_fpca
from .score_forecast import fit_score_model
from .simulate import simulate_far1
from .updating import (
    FLR_MIN_M0,
    PartialObservation,
    bm_forecast,
    decile_blocks,
    flr_update,
    ols_update,
    pls_update,
    rr_update,
    split_sizes,
    ts_forecast,
    tune_lambda,
)

log = logging.getLogger(__name__)

BAND_METHODS = ("TS", "BM", "PLS", "FLR")
INCOMPLETE_MARKER = "INCOMPLETE"


def load_panel(cfg: ExperimentConfig) -> CurvePanel:
    if cfg.simulate:
        return simulate_far1(cfg.far1())
    panel = read_panel_csv(cfg.input, cfg.session())
    return panel if panel.scale_tag == CIDR else to_cidr(panel)


def fit_decomposition(X, decomp: str = "fpca", delta: float = 0.9):
    if decomp == "fpca":
        return fit_fpca(X, delta)
    if decomp == "robust_fpca":
        return fit_robust_fpca(X, delta=delta)
    if decomp == "robrsvd":
        return fit_robrsvd(X, K=fit_fpca(X, delta).K)
    raise ValueError(f"unknown decomposition {decomp!r}")


def evaluation_blocks(cfg: ExperimentConfig, m: int) -> list:
    if cfg.full_updating:
        return list(range(1, m))
    if cfg.m0_blocks:
        return sorted(b for b in cfg.m0_blocks if 1 <= b < m)
    return decile_blocks(m)


@dataclass
class _Record:
    """Remainder forecasts of one method at one m0 for every test day."""

    actual: list = field(default_factory=list)
    point: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)


def _tune(panel, cfg, blocks, method):
    f_train, f_val, _ = cfg.fractions()
    return tune_lambda(panel, method, cfg.lambda_grid, blocks, "MSFE", cfg.score_model, cfg.delta,
                       shares=(f_train, f_val))


def _method_id(name):
    return BAND_METHODS.index(name) + 1


def run_pipeline(cfg: ExperimentConfig) -> dict:
    """Run the evaluation and write reports into ``cfg.out``.

    Returns a dict of output paths. On failure a file named ``INCOMPLETE``
    holding the error message is left next to any partial outputs.
    """
    os.makedirs(cfg.out, exist_ok=True)
    marker = os.path.join(cfg.out, INCOMPLETE_MARKER)
    with open(marker, "w", encoding="utf-8") as fh:
        fh.write("run started\n")
    try:
        paths = _run(cfg)
    except Exception as exc:
        with open(marker, "w", encoding="utf-8") as fh:
            fh.write(f"{type(exc).__name__}: {exc}\n")
        raise
    os.remove(marker)
    return paths


def _run(cfg: ExperimentConfig) -> dict:
    panel = load_panel(cfg)
    X = np.asarray(panel.values)
    n, m = X.shape
    f_train, f_val, _ = cfg.fractions()
    n_train, n_val = split_sizes(n, f_train, f_val)
    first = n_train + n_val
    test_days = list(range(first, n))
    if cfg.max_test_days:
        test_days = test_days[: cfg.max_test_days]
    if not test_days:
        raise ValueError(f"no test days: n={n}, training+validation={first}")
    blocks = evaluation_blocks(cfg, m)
    ups = cfg.updaters
    schedules = {meth: _tune(panel, cfg, blocks, meth) for meth in ("RR", "PLS") if meth in ups}

    recs = {(u, m0): _Record() for u in ups for m0 in blocks}
    band_rows = []
    ts_rows = []
    for d in test_days:
        H = X[:d]
        model = fit_decomposition(H, cfg.decomp, cfg.delta)
        fc = fit_score_model(model.scores, cfg.score_model)
        beta_ts = fc.forecast(1).point[0]
        curve = ts_forecast(model, beta_ts)
        ts_rows.append([panel.day_ids[d]] + list(curve))
        ts_band = ts_interval(model, fc, cfg.bootstrap(d, 0, _method_id("TS"))) if cfg.bands and "TS" in ups else None
        for m0 in blocks:
            obs = PartialObservation(X[d, :m0], d)
            truth = X[d, m0:]
            for u in ups:
                point, band = None, None
                if u == "TS":
                    point = curve[m0:]
                    band = None if ts_band is None else ts_band.restrict(m0, m)
                elif u == "BM":
                    res = bm_forecast(H, obs, cfg.delta, cfg.score_model)
                    point = res.remainder
                    if cfg.bands:
                        band = bm_interval(H, obs, cfg.bootstrap(d, m0, _method_id("BM")), cfg.delta,
                                           cfg.score_model, (res.meta["model"], res.meta["forecaster"]))
                elif u == "OLS":
                    try:
                        point = ols_update(model, obs).remainder
                    except SingularDesign:
                        point = None
                elif u == "RR":
                    point = rr_update(model, obs, schedules["RR"].lambda_for(m0)).remainder
                elif u == "PLS":
                    lam = schedules["PLS"].lambda_for(m0)
                    point = pls_update(model, obs, beta_ts, lam).remainder
                    if cfg.bands:
                        band = pls_interval(model, obs, fc, lam, cfg.bootstrap(d, m0, _method_id("PLS")))
                elif u == "FLR" and m0 >= FLR_MIN_M0:
                    point = flr_update(H, obs, cfg.delta).remainder
                    if cfg.bands:
                        band = flr_interval(H, obs, cfg.bootstrap(d, m0, _method_id("FLR")), cfg.delta)
                if point is None:
                    continue
                r = recs[(u, m0)]
                r.actual.append(truth)
                r.point.append(point)
                if band is not None:
                    r.lower.append(band.lower)
                    r.upper.append(band.upper)
                    for j, (p, lo, hi) in enumerate(zip(band.point, band.lower, band.upper)):
                        band_rows.append([panel.day_ids[d], m0, u, repr(float(panel.grid[m0 + j])),
                                          repr(float(p)), repr(float(lo)), repr(float(hi)), repr(band.level)])
    return _write_reports(cfg, panel, blocks, ups, recs, band_rows, ts_rows, schedules,
                          {"n": n, "m": m, "n_train": n_train, "n_validation": n_val,
                           "test_days": [panel.day_ids[d] for d in test_days]})


METRICS = ("MAFE", "MSFE", "MME_U", "MME_O", "MCPDC", "IS")


def _block_metrics(r: _Record, alpha: float) -> dict:
    """Metrics of one (method, m0) cell averaged over days and remainder points."""
    if not r.actual:
        return {k: np.nan for k in METRICS}
    a, f = np.vstack(r.actual), np.vstack(r.point)
    surf = metrics.pointwise_errors(a, f)
    mu, mo = metrics.mme(a, f)
    out = {
        "MAFE": float(surf.mafe.mean()),
        "MSFE": float(surf.msfe.mean()),
        "MME_U": float(mu.mean()),
        "MME_O": float(mo.mean()),
        "MCPDC": float(metrics.mcpdc(a, f).mean()),
        "IS": np.nan,
    }
    if r.lower and len(r.lower) == len(r.actual):
        out["IS"] = float(metrics.mean_interval_score(np.vstack(r.lower), np.vstack(r.upper), a, alpha).mean())
    return out


def _daily_loss(recs, method, blocks, kind):
    """Per-day loss averaged over the given blocks and their remainder points."""
    per_block = []
    for m0 in blocks:
        r = recs[(method, m0)]
        e = np.vstack(r.actual) - np.vstack(r.point)
        per_block.append(np.mean(e**2 if kind == "squared" else np.abs(e), axis=1))
    return np.mean(per_block, axis=0)


def _dm_matrix(recs, ups, blocks, n_days):
    out = {}
    for kind in ("squared", "absolute"):
        table = {}
        for a in ups:
            row = {}
            for b in ups:
                if a == b:
                    continue
                common = [m0 for m0 in blocks
                          if len(recs[(a, m0)].actual) == n_days and len(recs[(b, m0)].actual) == n_days]
                entry = {"statistic": None, "p_value": None, "blocks": len(common)}
                if common and n_days >= 10:
                    try:
                        stat, p = metrics.dm_test(_daily_loss(recs, a, common, kind),
                                                  _daily_loss(recs, b, common, kind), "a_less")
                        entry.update(statistic=stat, p_value=p)
                    except metrics.DegenerateLossDifferential:
                        pass
                row[b] = entry
            table[a] = row
        out[kind] = table
    return out


def _write_reports(cfg, panel, blocks, ups, recs, band_rows, ts_rows, schedules, info) -> dict:
    out = cfg.out
    paths = {}
    cells = {(u, m0): _block_metrics(recs[(u, m0)], cfg.alpha) for u in ups for m0 in blocks}
    columns = {f"{u}_{k}": [cells[(u, m0)][k] for m0 in blocks] for u in ups for k in METRICS}
    paths["metrics"] = os.path.join(out, "metrics.csv")
    metrics.write_metric_csv(paths["metrics"], blocks, columns)

    summary = {"run": info, "alpha": cfg.alpha, "blocks": blocks, "methods": {}}
    for u in ups:
        summary["methods"][u] = {k: metrics.summarize([cells[(u, m0)][k] for m0 in blocks]) for k in METRICS}
    summary["lambdas"] = {k: {"m0": s.grid_times, "lambda": s.lambdas} for k, s in schedules.items()}
    paths["summary"] = os.path.join(out, "summary.json")
    metrics.write_json(paths["summary"], summary)

    paths["dm"] = os.path.join(out, "dm_test.json")
    metrics.write_json(paths["dm"], _dm_matrix(recs, ups, blocks, len(info["test_days"])))

    for k, s in schedules.items():
        paths[f"lambda_{k}"] = os.path.join(out, f"lambda_{k.lower()}.json")
        with open(paths[f"lambda_{k}"], "w", encoding="utf-8") as fh:
            fh.write(s.to_json() + "\n")

    paths["ts_forecasts"] = os.path.join(out, "ts_forecasts.csv")
    with open(paths["ts_forecasts"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day_id"] + [repr(float(g)) for g in panel.grid])
        for row in ts_rows:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])

    if cfg.bands:
        paths["bands"] = os.path.join(out, "bands.csv")
        with open(paths["bands"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["day_id", "m0", "method", "grid_time", "point", "lower", "upper", "level"])
            w.writerows(band_rows)

    # the output directory is left out so reruns elsewhere stay byte-identical
    paths["config"] = os.path.join(out, "config.txt")
    with open(paths["config"], "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text(exclude=("out",)))
    return paths
