"""Pointwise bootstrap prediction bands for TS, BM, PLS and FLR forecasts.

Every replicate b draws from its own generator spawned from the configured
seed, so a band does not depend on the order in which replicates are made.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import HistoryTooShort, SeriesTooShort
from .fpca import FpcaModel, fit_fpca, panel_values
from .score_forecast import ARIMA, ScoreForecaster, fit_score_model
from .updating import PartialObservation, _design, fit_flr, pls_coefficients, reblock

MEBOOT_TRIM = 0.10
MIN_FLR_POOL = 10


@dataclass(frozen=True)
class BootstrapConfig:
    """``rng_seed`` is an integer or a tuple of integers (an entropy pool)."""

    B: int = 1000
    alpha: float = 0.2
    rng_seed: int | tuple = 0

    def __post_init__(self):
        if self.B < 50:
            raise ValueError("B must be at least 50")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def level(self) -> float:
        return 1.0 - self.alpha

    def generators(self):
        seqs = np.random.SeedSequence(self.rng_seed).spawn(self.B)
        return [np.random.default_rng(s) for s in seqs]


@dataclass(frozen=True)
class PredictionBand:
    """Pointwise band over grid indices ``start..stop-1``.

    ``replicates`` (B x width) is kept so bands at other levels can be read off
    the same draws with :meth:`at_level`.
    """

    start: int
    stop: int
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    B: int
    method_tag: str
    replicates: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def grid_slice(self) -> slice:
        return slice(self.start, self.stop)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def at_level(self, level: float) -> "PredictionBand":
        if self.replicates is None:
            raise ValueError("band was built without stored replicates")
        return band_from_replicates(self.replicates, self.point, 1.0 - level, self.start, self.method_tag)

    def covers(self, actual) -> np.ndarray:
        a = np.asarray(actual, dtype=float)
        return (a >= self.lower) & (a <= self.upper)

    def restrict(self, start: int, stop: int) -> "PredictionBand":
        """Sub-band over absolute grid indices ``start..stop-1``."""
        i, j = start - self.start, stop - self.start
        reps = None if self.replicates is None else self.replicates[:, i:j]
        return PredictionBand(start, stop, self.point[i:j], self.lower[i:j], self.upper[i:j],
                              self.level, self.B, self.method_tag, reps)


def band_from_replicates(reps, point, alpha, start=0, method_tag="", keep=True) -> PredictionBand:
    """Type-7 empirical quantiles at alpha/2 and 1 - alpha/2."""
    reps = np.asarray(reps, dtype=float)
    lo, hi = np.quantile(reps, [alpha / 2, 1 - alpha / 2], axis=0, method="linear")
    return PredictionBand(start, start + reps.shape[1], np.asarray(point, dtype=float), lo, hi,
                          1.0 - alpha, reps.shape[0], method_tag, reps if keep else None)


def write_band_csv(band: PredictionBand, path_or_buf, grid=None) -> None:
    """Columns grid_time, point, lower, upper, level."""
    times = np.arange(band.start, band.stop) if grid is None else np.asarray(grid)[band.start:band.stop]
    own = not hasattr(path_or_buf, "write")
    fh = open(path_or_buf, "w", encoding="utf-8", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid_time", "point", "lower", "upper", "level"])
        for row in zip(times, band.point, band.lower, band.upper):
            w.writerow([repr(float(v)) for v in row] + [repr(band.level)])
    finally:
        if own:
            fh.close()


# --- TS / BM / PLS -----------------------------------------------------------


def _score_draws(forecaster: ScoreForecaster, model: FpcaModel, cfg: BootstrapConfig):
    """Bootstrapped next-day scores (B x K) and residual-curve indices (B,)."""
    if model.n - model.K < 10:
        raise HistoryTooShort(f"n - K = {model.n - model.K} is below 10")
    errs = forecaster.insample_errors()
    if any(e.size == 0 for e in errs):
        raise HistoryTooShort("a score model has no in-sample one-step errors")
    beta = forecaster.forecast(1).point[0]
    draws = np.empty((cfg.B, model.K))
    idx = np.empty(cfg.B, dtype=int)
    for b, rng in enumerate(cfg.generators()):
        for k, e in enumerate(errs):
            draws[b, k] = beta[k] + e[rng.integers(e.size)]
        idx[b] = rng.integers(model.n)
    return beta, draws, idx


def ts_interval(model: FpcaModel, forecaster: ScoreForecaster, cfg: BootstrapConfig | None = None) -> PredictionBand:
    """Full-curve band from resampled one-step score errors and residual curves."""
    cfg = cfg or BootstrapConfig()
    if forecaster.K != model.K:
        from .errors import DimensionMismatch

        raise DimensionMismatch("forecaster and model disagree on K")
    beta, draws, idx = _score_draws(forecaster, model, cfg)
    reps = model.mean_curve + draws @ model.components.T + model.residuals[idx]
    return band_from_replicates(reps, model.curve(beta), cfg.alpha, 0, "TS")


def bm_interval(panel, obs: PartialObservation | None, cfg: BootstrapConfig | None = None,
                delta: float = 0.9, score_model: str = ARIMA, fitted=None) -> PredictionBand:
    """TS band of the re-blocked panel, cut to the remainder of the day.

    ``fitted`` may carry the ``(model, forecaster)`` pair already fitted to the
    re-blocked panel, e.g. from ``bm_forecast(...).meta``.
    """
    Y = reblock(panel, obs)
    m0 = 0 if obs is None else obs.m0
    if fitted is None:
        model = fit_fpca(Y, delta)
        fitted = (model, fit_score_model(model.scores, score_model))
    band = ts_interval(*fitted, cfg)
    cut = band.restrict(0, Y.shape[1] - m0)
    return PredictionBand(m0, Y.shape[1], cut.point, cut.lower, cut.upper, cut.level, cut.B, "BM",
                          cut.replicates)


def pls_interval(model: FpcaModel, obs: PartialObservation, forecaster: ScoreForecaster, lam: float,
                 cfg: BootstrapConfig | None = None) -> PredictionBand:
    """Map each bootstrapped TS score vector through the PLS update."""
    cfg = cfg or BootstrapConfig()
    F, xstar = _design(model, obs)
    m0 = obs.m0
    beta, draws, idx = _score_draws(forecaster, model, cfg)
    B_pls = pls_coefficients(F, np.repeat(xstar[:, None], cfg.B, axis=1), draws.T, lam)
    tail_mean, tail_comp = model.mean_curve[m0:], model.components[m0:]
    reps = tail_mean + (tail_comp @ B_pls).T + model.residuals[idx, m0:]
    point = tail_mean + tail_comp @ pls_coefficients(F, xstar, beta, lam)
    return band_from_replicates(reps, point, cfg.alpha, m0, "PLS")


# --- maximum entropy bootstrap -----------------------------------------------


def _trimmed_mean(a, trim):
    a = np.sort(np.asarray(a, dtype=float))
    cut = int(np.floor(trim * a.size))
    core = a[cut: a.size - cut] if a.size - 2 * cut > 0 else a
    return float(core.mean())


class MebootKnots:
    """Order statistics and the piecewise-linear quantile function of one series."""

    def __init__(self, x, trim=MEBOOT_TRIM):
        x = np.asarray(x, dtype=float)
        if x.size < 4:
            raise SeriesTooShort("meboot needs at least 4 observations")
        self.n = x.size
        self.order = np.argsort(x, kind="stable")
        xs = x[self.order]
        tail = _trimmed_mean(np.abs(np.diff(x)), trim)
        mids = 0.5 * (xs[:-1] + xs[1:])
        self.knots = np.r_[xs[0] - tail, mids, xs[-1] + tail]
        self.probs = np.linspace(0.0, 1.0, self.n + 1)

    def replicate(self, u_sorted) -> np.ndarray:
        q = np.interp(u_sorted, self.probs, self.knots)
        out = np.empty(self.n)
        out[self.order] = q
        return out


def _sorted_uniforms(rng, n):
    return np.sort(rng.random(n))


def meboot(series, B: int = 999, seed: int = 0) -> np.ndarray:
    """Maximum entropy bootstrap replicates (B x n) of a time series.

    Each replicate keeps the rank pattern of the original series; its values
    are sorted uniform draws pushed through the maximum entropy quantile
    function whose knots are the midpoints of consecutive order statistics,
    extended in each tail by the 10% trimmed mean of absolute first
    differences.

    Examples
    --------
    >>> meboot([2.0, 2.0, 2.0, 2.0], B=2)
    array([[2., 2., 2., 2.],
           [2., 2., 2., 2.]])
    """
    kn = MebootKnots(series)
    seqs = np.random.SeedSequence(seed).spawn(B)
    return np.vstack([kn.replicate(_sorted_uniforms(np.random.default_rng(s), kn.n)) for s in seqs])


def meboot_columns(X, rng) -> np.ndarray:
    """One replicate of every column of X using the same sorted uniforms."""
    X = np.asarray(X, dtype=float)
    u = _sorted_uniforms(rng, X.shape[0])
    return np.column_stack([MebootKnots(X[:, j]).replicate(u) for j in range(X.shape[1])])


# --- FLR ---------------------------------------------------------------------


def flr_interval(panel, obs: PartialObservation, cfg: BootstrapConfig | None = None,
                 delta: float = 0.9) -> PredictionBand:
    """Band for the FLR remainder.

    The panel's full-rank score matrix is resampled by maximum entropy
    bootstrap with uniforms shared across columns. Replicate curves are
    projected on the fixed block components to re-estimate the score
    regression, and a resampled FLR residual curve is added.
    """
    cfg = cfg or BootstrapConfig()
    X = panel_values(panel)
    n, m = X.shape
    m0 = obs.m0
    fit = fit_flr(X, m0, delta)
    point = fit.predict(obs.observed)[0]
    xi_new = fit.early.project(obs.observed)[0]
    resid = fit.residuals()
    K = fit.early.K
    if n - K < MIN_FLR_POOL:
        warnings.warn(f"FLR residual pool from day {K} is too small; using all {n} residual curves",
                      RuntimeWarning, stacklevel=2)
        pool = resid
    else:
        pool = resid[K - 1:]
    full = fit_fpca(X, delta=1.0)
    knots = [MebootKnots(full.scores[:, j]) for j in range(full.K)]
    Phi, Psi = fit.early.components, fit.late.components
    mu_e, mu_l = fit.early.mean_curve, fit.late.mean_curve
    reps = np.empty((cfg.B, m - m0))
    for b, rng in enumerate(cfg.generators()):
        u = _sorted_uniforms(rng, n)
        S = np.column_stack([kn.replicate(u) for kn in knots])
        Xb = full.mean_curve + S @ full.components.T
        xi = (Xb[:, :m0] - mu_e) @ Phi
        zeta = (Xb[:, m0:] - mu_l) @ Psi
        coef, *_ = np.linalg.lstsq(xi, zeta, rcond=None)
        reps[b] = mu_l + xi_new @ coef @ Psi.T + pool[rng.integers(pool.shape[0])]
    return band_from_replicates(reps, point, cfg.alpha, m0, "FLR")
