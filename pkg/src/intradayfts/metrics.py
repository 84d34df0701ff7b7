"""Point, directional and interval accuracy measures and the Diebold-Mariano test."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DegenerateLossDifferential, InvertedInterval, ShapeMismatch


def _pair(actual, forecast):
    a = np.atleast_2d(np.asarray(actual, dtype=float))
    f = np.atleast_2d(np.asarray(forecast, dtype=float))
    if a.shape != f.shape:
        raise ShapeMismatch(f"actual {a.shape} vs forecast {f.shape}")
    if a.shape[0] < 1:
        raise ShapeMismatch("need at least one evaluation day")
    return a, f


@dataclass(frozen=True)
class ErrorSurface:
    """MAFE and MSFE at each evaluated grid point over q days."""

    mafe: np.ndarray
    msfe: np.ndarray
    q: int
    method_tag: str = ""


def pointwise_errors(actual, forecast, method_tag: str = "") -> ErrorSurface:
    """Mean absolute and mean squared forecast error per grid point (days in rows)."""
    a, f = _pair(actual, forecast)
    e = a - f
    return ErrorSurface(np.mean(np.abs(e), axis=0), np.mean(e**2, axis=0), a.shape[0], method_tag)


def mme(actual, forecast):
    """Asymmetric mean mixed errors per grid point.

    MME(U) applies the square root to under-predictions (forecast below
    actual) and the absolute error to over-predictions; MME(O) swaps them.

    Returns
    -------
    (mme_u, mme_o) : tuple of ndarray
    """
    a, f = _pair(actual, forecast)
    e = np.abs(a - f)
    under = f < a
    over = f > a
    root = np.sqrt(e)
    mme_u = np.mean(np.where(over, e, 0.0) + np.where(under, root, 0.0), axis=0)
    mme_o = np.mean(np.where(over, root, 0.0) + np.where(under, e, 0.0), axis=0)
    return mme_u, mme_o


def mcpdc(actual, forecast) -> np.ndarray:
    """Percentage of days whose forecast has the sign of the actual value."""
    a, f = _pair(actual, forecast)
    return 100.0 * np.mean(np.sign(a) == np.sign(f), axis=0)


def interval_score(lower, upper, actual, alpha: float = 0.2):
    """Width plus ``2/alpha`` times the distance by which ``actual`` falls outside.

    Works elementwise on arrays.

    Examples
    --------
    >>> float(interval_score(0.0, 1.0, 1.5, 0.2))
    6.0
    """
    lo, hi, x = (np.asarray(v, dtype=float) for v in (lower, upper, actual))
    if np.any(lo > hi):
        raise InvertedInterval("lower bound exceeds upper bound")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    s = (hi - lo) + (2 / alpha) * (lo - x) * (x < lo) + (2 / alpha) * (x - hi) * (x > hi)
    return s if s.ndim else float(s)


def mean_interval_score(lower, upper, actual, alpha: float = 0.2) -> np.ndarray:
    """Interval score averaged over days (rows) at each grid point."""
    lo, hi = _pair(lower, upper)
    _, x = _pair(lower, actual)
    return np.mean(interval_score(lo, hi, x, alpha), axis=0)


def dm_test(loss_a, loss_b, alternative: str = "two_sided"):
    """Diebold-Mariano statistic for one-step forecasts.

    The variance of the loss differential is its lag-0 sample variance; no
    small-sample correction is applied. ``a_less`` tests whether method A has
    the smaller expected loss.

    Returns
    -------
    (statistic, p_value)
    """
    a = np.asarray(loss_a, dtype=float).ravel()
    b = np.asarray(loss_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ShapeMismatch("loss sequences differ in length")
    if a.size < 10:
        raise ShapeMismatch("need at least 10 paired losses")
    d = a - b
    if not np.any(d):
        raise DegenerateLossDifferential("loss differential is identically zero")
    var = np.var(d, ddof=1)
    T = d.size
    if var == 0:
        stat = np.copysign(np.inf, d.mean())
    else:
        stat = d.mean() / np.sqrt(var / T)
    if alternative == "two_sided":
        p = 2 * norm.sf(abs(stat))
    elif alternative == "a_less":
        p = norm.cdf(stat)
    else:
        raise ValueError("alternative must be 'two_sided' or 'a_less'")
    return float(stat), float(p)


SUMMARY_STATS = ("min", "median", "mean", "max")


def summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {k: None for k in SUMMARY_STATS}
    return {"min": float(v.min()), "median": float(np.median(v)), "mean": float(v.mean()), "max": float(v.max())}


def write_metric_csv(path, grid_index, columns: dict) -> None:
    """One row per grid point; ``columns`` maps header to a vector on the
    same grid (NaN where a method does not report)."""
    names = list(columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid_index"] + names)
        for i, j in enumerate(grid_index):
            w.writerow([int(j)] + [repr(float(columns[c][i])) for c in names])


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
