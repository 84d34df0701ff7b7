"""Score-sequence models: per-component auto-ARIMA or a VAR selected by AICc."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arima import ArimaModel, fit_auto_arima
from .errors import InsufficientData, SingularDesign

ARIMA = "arima"
VAR = "var"


def _lag_design(Y, order, start):
    """Rows t = start..n-1 of [1, y_{t-1}, ..., y_{t-order}]."""
    n = Y.shape[0]
    cols = [np.ones((n - start, 1))]
    for lag in range(1, order + 1):
        cols.append(Y[start - lag: n - lag])
    return np.hstack(cols)


@dataclass(frozen=True)
class VarModel:
    """``y_t = c + sum_v A_v y_{t-v} + a_t`` with ``coefs[v-1] = A_v``."""

    order: int
    intercept: np.ndarray
    coefs: np.ndarray
    innovation_covariance: np.ndarray
    aicc: float
    fitted_on: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.intercept.size

    def _history(self, history):
        Y = self.fitted_on if history is None else np.asarray(history, dtype=float)
        return Y.reshape(-1, 1) if Y.ndim == 1 else Y

    def one_step_predictions(self, history=None) -> np.ndarray:
        """In-sample one-step forecasts for rows order..n-1."""
        Y = self._history(history)
        X = _lag_design(Y, self.order, self.order)
        B = np.vstack([self.intercept[None, :]] + [A.T for A in self.coefs])
        return X @ B

    def one_step_errors(self, history=None) -> np.ndarray:
        Y = self._history(history)
        return Y[self.order:] - self.one_step_predictions(Y)

    def forecast(self, h: int, history=None) -> np.ndarray:
        if h < 1:
            raise ValueError("h must be at least 1")
        Y = self._history(history)
        hist = [row for row in Y[Y.shape[0] - self.order:]] if self.order else []
        out = np.empty((h, self.K))
        for s in range(h):
            y = self.intercept.copy()
            for v in range(1, self.order + 1):
                y += self.coefs[v - 1] @ hist[-v]
            out[s] = y
            hist.append(y)
        return out

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "intercept": self.intercept.tolist(),
            "coefs": self.coefs.tolist(),
            "innovation_covariance": self.innovation_covariance.tolist(),
            "aicc": self.aicc,
        }


def _ols_var(Y, order, start):
    X = _lag_design(Y, order, start)
    target = Y[start:]
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesign(f"lag design for VAR({order}) is rank deficient")
    B, *_ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ B
    return B, resid


def _var_loglik(resid):
    N, K = resid.shape
    S = resid.T @ resid / N
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        return -np.inf, S
    return -0.5 * N * (K * np.log(2 * np.pi) + logdet + K), S


def fit_var(scores, max_order: int = 5, order: int | None = None) -> VarModel:
    """Equationwise least-squares VAR with AICc order selection.

    Every order is compared on the same sample (the last ``n - max_order``
    rows). The AICc correction counts ``N = K * (n - max_order)`` scalar
    observations against ``K^2 * order + K`` mean parameters. The selected
    order is then refitted on all rows it can use. Passing ``order`` skips
    the search.

    Examples
    --------
    >>> rng = np.random.default_rng(0)
    >>> fit_var(rng.normal(size=(200, 2)), max_order=3).order
    0
    """
    Y = np.asarray(scores, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, K = Y.shape
    top = max_order if order is None else int(order)
    if n < K * top + K + 5:
        raise InsufficientData(f"{n} rows are too few for VAR order {top} with K={K}")
    if order is None:
        N = K * (n - max_order)
        table = []
        for v in range(max_order + 1):
            _, resid = _ols_var(Y, v, max_order)
            ll, _ = _var_loglik(resid)
            k = K * K * v + K
            crit = -2 * ll + 2 * k * N / (N - k - 1) if N - k - 1 > 0 else np.inf
            table.append(crit)
        chosen = int(np.argmin(table))
    else:
        chosen, table = top, []
    B, resid = _ols_var(Y, chosen, chosen)
    ll, S = _var_loglik(resid)
    if not np.all(np.linalg.eigvalsh(S) > 0):
        raise SingularDesign("innovation covariance is not positive definite")
    k = K * K * chosen + K
    Nf = resid.size
    crit = -2 * ll + 2 * k * Nf / (Nf - k - 1) if Nf - k - 1 > 0 else np.inf
    coefs = np.stack([B[1 + (v - 1) * K: 1 + v * K].T for v in range(1, chosen + 1)]) if chosen else np.zeros((0, K, K))
    return VarModel(chosen, B[0].copy(), coefs, S, float(crit), Y.copy(),
                    {"aicc_by_order": [float(t) for t in table]})


@dataclass(frozen=True)
class ScoreForecast:
    horizon: int
    point: np.ndarray
    method_tag: str


@dataclass(frozen=True)
class ScoreForecaster:
    """A fitted score model: one ARIMA per component or a single VAR."""

    method: str
    models: tuple
    fitted_on: np.ndarray

    @property
    def K(self) -> int:
        return self.fitted_on.shape[1]

    def forecast(self, h: int = 1, history=None) -> ScoreForecast:
        """Conditional-mean forecasts; ``history`` filters the fitted model
        over a different score sequence without re-estimating it."""
        H = None if history is None else np.asarray(history, dtype=float).reshape(-1, self.K)
        if self.method == VAR:
            pt = self.models[0].forecast(h, H)
        else:
            pt = np.column_stack([m.forecast(h, None if H is None else H[:, k])
                                  for k, m in enumerate(self.models)])
        return ScoreForecast(h, pt, self.method)

    def insample_errors(self) -> list:
        """One-step in-sample score errors, one array per component."""
        if self.method == VAR:
            E = self.models[0].one_step_errors()
            return [E[:, k].copy() for k in range(self.K)]
        return [m.one_step_errors() for m in self.models]

    def to_dict(self) -> dict:
        return {"method": self.method, "models": [m.to_dict() for m in self.models]}


def fit_score_model(scores, method: str = ARIMA, max_p=3, max_q=3, max_d=2, max_order=5) -> ScoreForecaster:
    S = np.asarray(scores, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if method == ARIMA:
        models = tuple(fit_auto_arima(S[:, k], max_p, max_q, max_d) for k in range(S.shape[1]))
    elif method == VAR:
        n, K = S.shape
        top = max_order
        while top > 0 and n < K * top + K + 5:
            top -= 1
        models = (fit_var(S, top),)
    else:
        raise ValueError(f"unknown score model {method!r}")
    return ScoreForecaster(method, models, S.copy())


def forecast_scores(model, history, h: int) -> ScoreForecast:
    """Forecast from a fitted ARIMA, VAR or :class:`ScoreForecaster`."""
    if h < 1:
        raise ValueError("h must be at least 1")
    if isinstance(model, ScoreForecaster):
        return model.forecast(h, history)
    if isinstance(model, ArimaModel):
        return ScoreForecast(h, model.forecast(h, history).reshape(h, 1), ARIMA)
    if isinstance(model, VarModel):
        return ScoreForecast(h, model.forecast(h, history), VAR)
    raise TypeError(f"cannot forecast from {type(model).__name__}")
