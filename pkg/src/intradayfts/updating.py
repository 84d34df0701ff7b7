"""One-day-ahead curve forecasts and their intraday updates.

After the first ``m0`` grid points of the new day are seen, the remaining
``m - m0`` points are re-forecast by block moving (BM), ordinary least squares
(OLS), ridge regression (RR), penalised least squares (PLS) or function-on-
function linear regression (FLR). Every updater returns only the remainder.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .curves import CurvePanel
from .errors import (
    DimensionMismatch,
    EmptyGrid,
    InsufficientObservation,
    SingularDesign,
    SingularScoreDesign,
    SplitTooSmall,
)
from .fpca import FpcaModel, fit_fpca, panel_values
from .score_forecast import ARIMA, ScoreForecaster, fit_score_model

log = logging.getLogger(__name__)

METHODS = ("TS", "BM", "OLS", "RR", "PLS", "FLR")
DEFAULT_LAMBDA_GRID = tuple(float(x) for x in np.logspace(-3, 3, 13))
FLR_MIN_M0 = 6
TRAIN_SHARE = 43 / 125
VALIDATION_SHARE = 42 / 125


@dataclass(frozen=True)
class PartialObservation:
    """The first ``m0`` grid values of the day being forecast."""

    observed: np.ndarray
    day_index: int | None = None

    def __post_init__(self):
        obs = np.array(self.observed, dtype=float).ravel()
        if obs.size < 1:
            raise InsufficientObservation("a partial observation needs at least one grid value")
        if not np.all(np.isfinite(obs)):
            raise ValueError("partial observation contains non-finite values")
        object.__setattr__(self, "observed", obs)

    @property
    def m0(self) -> int:
        return self.observed.size


@dataclass(frozen=True)
class UpdateResult:
    method_tag: str
    remainder: np.ndarray
    m0: int
    coefficients: np.ndarray | None = None
    lambda_used: float | None = None
    meta: dict = field(default_factory=dict)


def _check_m0(obs: PartialObservation, m: int):
    if not 1 <= obs.m0 < m:
        raise DimensionMismatch(f"m0={obs.m0} must lie in 1..{m - 1}")


def _next_scores(model: FpcaModel, forecaster) -> np.ndarray:
    if isinstance(forecaster, ScoreForecaster):
        beta = forecaster.forecast(1).point[0]
    else:
        beta = np.asarray(forecaster, dtype=float).ravel()
    if beta.size != model.K:
        raise DimensionMismatch(f"score forecast has {beta.size} components, model has {model.K}")
    return beta


def ts_forecast(model: FpcaModel, forecaster) -> np.ndarray:
    """Full next-day curve ``mean + components @ beta`` from forecast scores.

    ``forecaster`` is a fitted :class:`ScoreForecaster` or a length-K vector of
    already forecast scores.
    """
    return model.curve(_next_scores(model, forecaster))


def ts_update(model: FpcaModel, forecaster, m0: int) -> UpdateResult:
    """The TS forecast restricted to the unobserved segment."""
    beta = _next_scores(model, forecaster)
    return UpdateResult("TS", model.curve(beta)[m0:], m0, beta)


def reblock(panel, obs: PartialObservation | None = None) -> np.ndarray:
    """Pseudo-curves spanning (m0, m] of one day and [1, m0] of the next.

    The first day's observed segment cannot start a complete block and is
    dropped. With the new day's partial observation appended, n historical
    curves yield n pseudo-curves: n - 1 built from historical days alone and a
    last one ending with the partial observation. ``obs=None`` means m0 = 0
    and returns the panel unchanged.
    """
    X = panel_values(panel, require_cidr=False)
    if obs is None:
        return X.copy()
    n, m = X.shape
    _check_m0(obs, m)
    m0 = obs.m0
    series = np.concatenate([X.ravel(), obs.observed])
    return series[m0:].reshape(n, m)


def bm_forecast(panel, obs: PartialObservation | None, delta: float = 0.9,
                score_model: str = ARIMA, n_components: int | None = None) -> UpdateResult:
    """Block-moving update: TS forecast of the re-blocked panel."""
    Y = reblock(panel, obs)
    m0 = 0 if obs is None else obs.m0
    if m0:
        log.info("BM drops the first %d observations of the first day", m0)
    model = fit_fpca(Y, delta, n_components)
    fc = fit_score_model(model.scores, score_model)
    beta = fc.forecast(1).point[0]
    curve = model.curve(beta)
    return UpdateResult("BM", curve[: Y.shape[1] - m0], m0, beta,
                        meta={"model": model, "forecaster": fc})


def _design(model: FpcaModel, obs: PartialObservation):
    _check_m0(obs, model.m)
    F = model.components[: obs.m0]
    xstar = obs.observed - model.mean_curve[: obs.m0]
    return F, xstar


def _remainder(model: FpcaModel, m0: int, beta) -> np.ndarray:
    return model.mean_curve[m0:] + model.components[m0:] @ beta


def _solve(A, b):
    K = A.shape[0]
    if np.linalg.matrix_rank(A) < K:
        raise SingularDesign("normal equations are singular")
    return np.linalg.solve(A, b)


def ols_update(model: FpcaModel, obs: PartialObservation) -> UpdateResult:
    """Regress the mean-adjusted observed segment on the observed part of the
    components and extend the fit over the remainder."""
    F, xstar = _design(model, obs)
    if obs.m0 < model.K:
        raise SingularDesign(f"m0={obs.m0} is smaller than K={model.K}")
    if np.linalg.matrix_rank(F) < model.K:
        raise SingularDesign("observed component matrix is rank deficient")
    beta = _solve(F.T @ F, F.T @ xstar)
    return UpdateResult("OLS", _remainder(model, obs.m0, beta), obs.m0, beta)


def rr_update(model: FpcaModel, obs: PartialObservation, lam: float) -> UpdateResult:
    """Ridge-shrunk regression coefficients, ``(F'F + lam I)^{-1} F'x*``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    F, xstar = _design(model, obs)
    beta = _solve(F.T @ F + lam * np.eye(model.K), F.T @ xstar)
    return UpdateResult("RR", _remainder(model, obs.m0, beta), obs.m0, beta, float(lam))


def pls_coefficients(F, xstar, beta_ts, lam) -> np.ndarray:
    """``(F'F + lam I)^{-1} (F'x* + lam beta_ts)``; ``xstar`` may hold one
    observation per column of a matrix, as may ``beta_ts``."""
    K = F.shape[1]
    return _solve(F.T @ F + lam * np.eye(K), F.T @ xstar + lam * beta_ts)


def pls_update(model: FpcaModel, obs: PartialObservation, beta_ts, lam: float) -> UpdateResult:
    """Penalised least squares shrinking the regression toward the TS scores.

    lam = 0 gives the OLS coefficients and lam -> infinity recovers
    ``beta_ts``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    beta_ts = np.asarray(beta_ts, dtype=float).ravel()
    if beta_ts.size != model.K:
        raise DimensionMismatch(f"beta_ts has {beta_ts.size} entries, model has K={model.K}")
    F, xstar = _design(model, obs)
    beta = pls_coefficients(F, xstar, beta_ts, lam)
    return UpdateResult("PLS", _remainder(model, obs.m0, beta), obs.m0, beta, float(lam))


@dataclass(frozen=True)
class FlrFit:
    """Blockwise FPCA of a panel split at m0 and the score regression between them.

    ``coef`` is the K x M matrix mapping predictor scores to response scores.
    """

    m0: int
    early: FpcaModel
    late: FpcaModel
    coef: np.ndarray

    def predict(self, observed) -> np.ndarray:
        xi = self.early.project(np.asarray(observed, dtype=float).reshape(-1, self.m0))
        return self.late.mean_curve + xi @ self.coef @ self.late.components.T

    def residuals(self) -> np.ndarray:
        fitted = self.late.mean_curve + self.early.scores @ self.coef @ self.late.components.T
        return self.late.reconstruct() - fitted


def fit_flr(panel, m0: int, delta: float = 0.9) -> FlrFit:
    X = panel_values(panel)
    n, m = X.shape
    if m0 < FLR_MIN_M0:
        raise InsufficientObservation(f"FLR needs m0 >= {FLR_MIN_M0}, got {m0}")
    if m0 >= m:
        raise DimensionMismatch(f"m0={m0} must be below m={m}")
    early = fit_fpca(X[:, :m0], delta)
    late = fit_fpca(X[:, m0:], delta)
    xi, zeta = early.scores, late.scores
    if n <= early.K + late.K:
        raise SingularScoreDesign(f"n={n} must exceed K+M={early.K + late.K}")
    G = xi.T @ xi
    if np.linalg.matrix_rank(G) < early.K:
        raise SingularScoreDesign("predictor scores are collinear")
    return FlrFit(m0, early, late, np.linalg.solve(G, xi.T @ zeta))


def flr_update(panel, obs: PartialObservation, delta: float = 0.9) -> UpdateResult:
    """Function-on-function regression of the remainder on the observed segment."""
    X = panel_values(panel)
    _check_m0(obs, X.shape[1])
    fit = fit_flr(X, obs.m0, delta)
    rem = fit.predict(obs.observed)[0]
    return UpdateResult("FLR", rem, obs.m0, fit.coef, meta={"fit": fit})


# --- lambda tuning -----------------------------------------------------------


@dataclass(frozen=True)
class LambdaSchedule:
    method: str
    grid_times: list
    lambdas: list

    def __post_init__(self):
        if len(self.grid_times) != len(self.lambdas) or not self.grid_times:
            raise ValueError("need one lambda per scheduled m0")
        if any(lam <= 0 for lam in self.lambdas):
            raise ValueError("tuned lambdas must be positive")

    def lambda_for(self, m0: int) -> float:
        """Lambda of the latest scheduled block not after ``m0`` (the first
        block's value before it)."""
        idx = np.searchsorted(np.asarray(self.grid_times), m0, side="right") - 1
        return float(self.lambdas[max(int(idx), 0)])

    def to_json(self) -> str:
        blocks = [{"m0": int(t), "lambda": float(v)} for t, v in zip(self.grid_times, self.lambdas)]
        return json.dumps({"method": self.method, "blocks": blocks}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LambdaSchedule":
        d = json.loads(text)
        return cls(d["method"], [b["m0"] for b in d["blocks"]], [b["lambda"] for b in d["blocks"]])


def decile_blocks(m: int) -> list:
    """Observation counts at the interior deciles of an m-point day."""
    return sorted({min(max(int(round(k * m / 10)), 1), m - 1) for k in range(1, 10)})


def split_sizes(n: int, train=TRAIN_SHARE, validation=VALIDATION_SHARE):
    """Training and validation counts; the rest of the days are for testing."""
    return math.floor(n * train + 1e-9), math.floor(n * validation + 1e-9)


def tune_lambda(panel, method: str, grid=DEFAULT_LAMBDA_GRID, m0_blocks=None, loss: str = "MSFE",
                score_model: str = ARIMA, delta: float = 0.9, min_train: int = 10,
                shares=(TRAIN_SHARE, VALIDATION_SHARE)) -> LambdaSchedule:
    """Pick the penalty for each m0 block by holdout loss on the validation days.

    The FPCA (and, for PLS, the score model) is fitted once on the training
    days. Validation days are projected on the training components and the
    fitted score model is run over them to give one-step TS scores without
    re-estimation. Ties go to the smaller lambda.
    """
    method = method.upper()
    if method not in ("RR", "PLS"):
        raise ValueError("lambda tuning applies to RR and PLS")
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise EmptyGrid("lambda grid is empty")
    if loss not in ("MAFE", "MSFE"):
        raise ValueError("loss must be MAFE or MSFE")
    X = panel_values(panel)
    n, m = X.shape
    n_train, n_val = split_sizes(n, *shares)
    if n_train < min_train or n_val < 1:
        raise SplitTooSmall(f"n={n} gives {n_train} training and {n_val} validation days")
    train, val = X[:n_train], X[n_train:n_train + n_val]
    model = fit_fpca(train, delta)
    blocks = decile_blocks(m) if m0_blocks is None else sorted(int(b) for b in m0_blocks)
    beta_ts = None
    if method == "PLS":
        fc = fit_score_model(model.scores, score_model)
        hist = np.vstack([model.scores, model.project(val)])
        beta_ts = np.vstack([fc.forecast(1, hist[: n_train + i]).point[0] for i in range(n_val)])
    lambdas = []
    for m0 in blocks:
        if not 1 <= m0 < m:
            raise DimensionMismatch(f"m0 block {m0} outside 1..{m - 1}")
        F = model.components[:m0]
        Xs = (val[:, :m0] - model.mean_curve[:m0]).T
        target = val[:, m0:]
        best = None
        for lam in grid:
            prior = np.zeros((model.K, n_val)) if beta_ts is None else beta_ts.T
            B = pls_coefficients(F, Xs, prior, lam)
            fc_rem = model.mean_curve[m0:] + (model.components[m0:] @ B).T
            err = target - fc_rem
            score = float(np.mean(np.abs(err)) if loss == "MAFE" else np.mean(err**2))
            if best is None or score < best[0]:
                best = (score, lam)
        lambdas.append(best[1])
    return LambdaSchedule(method, blocks, lambdas)
