"""Automatic non-seasonal ARIMA selected by corrected AIC.

Models are written as ``(1 - sum phi_i B^i)(1 - B)^d x_t = gamma + (1 + sum theta_j B^j) w_t``
and estimated by conditional sum of squares: the first ``cond`` differenced
observations are conditioned on and pre-sample innovations are zero. Every
candidate in an automatic search conditions on the same ``max_p`` values so
their likelihoods are computed on a common sample.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.signal import lfilter

from .errors import NoAdmissibleModel, SeriesTooShort

ROOT_TOL = 1e-6
ADMISSIBLE_ROOT = 1.01
CANCEL_TOL = 0.1
_ONE = np.ones(1)


def _pacf_to_coeffs(r):
    """Durbin-Levinson map from partial autocorrelations to AR coefficients."""
    phi = []
    for rk in r:
        phi = [a - rk * b for a, b in zip(phi, phi[::-1])] + [rk]
    return np.array(phi, dtype=float)


def _coeffs_to_pacf(phi):
    phi = np.array(phi, dtype=float)
    r = np.zeros(phi.size)
    for k in range(phi.size - 1, -1, -1):
        rk = phi[k]
        r[k] = rk
        if abs(rk) >= 1:
            return None
        if k:
            phi = (phi[:k] + rk * phi[:k][::-1]) / (1 - rk**2)
    return r


def _constrain(x):
    return _pacf_to_coeffs(np.tanh(x)) if len(x) else np.zeros(0)


def _unconstrain(coeffs, shrink=0.98):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0:
        return np.zeros(0)
    for _ in range(50):
        r = _coeffs_to_pacf(coeffs)
        if r is not None and np.all(np.abs(r) < 0.999):
            return np.arctanh(r)
        coeffs = coeffs * shrink ** np.arange(1, coeffs.size + 1)
    return np.zeros(coeffs.size)


def roots_ok(ar, ma, margin=1 + ROOT_TOL) -> bool:
    """AR and MA polynomial roots lie outside a circle of radius ``margin``."""
    for poly in (np.r_[1.0, -np.asarray(ar)], np.r_[1.0, np.asarray(ma)]):
        if poly.size > 1 and np.any(poly[1:] != 0):
            roots = np.roots(poly[::-1])
            if np.any(np.abs(roots) <= margin):
                return False
    return True


def redundant(ar, ma, tol=CANCEL_TOL) -> bool:
    """True when some AR and MA inverse roots nearly coincide (a common factor)."""
    ar, ma = np.asarray(ar, float), np.asarray(ma, float)
    if ar.size == 0 or ma.size == 0:
        return False
    ra = np.roots(np.r_[1.0, -ar])
    rm = np.roots(np.r_[1.0, ma])
    return bool(np.min(np.abs(ra[:, None] - rm[None, :])) < tol)


def difference(x, d):
    x = np.asarray(x, dtype=float)
    for _ in range(d):
        x = np.diff(x)
    return x


def css_residuals(w, mean, ar, ma, cond):
    """Innovations of the differenced series; zeros before ``cond``."""
    y = np.asarray(w, dtype=float) - mean
    p = len(ar)
    out = np.zeros(y.size)
    a = y[cond:].copy()
    for i in range(p):
        a -= ar[i] * y[cond - 1 - i: y.size - 1 - i]
    if len(ma):
        den = np.empty(len(ma) + 1)
        den[0] = 1.0
        den[1:] = ma
        a = lfilter(_ONE, den, a)
    out[cond:] = a
    return out


@dataclass(frozen=True)
class ArimaModel:
    order: tuple
    intercept: float
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    innovation_variance: float
    aicc: float
    loglik: float
    fitted_on: np.ndarray
    include_intercept: bool
    cond: int
    n_params: int
    meta: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        """Mean of the differenced series implied by the intercept."""
        s = 1.0 - float(np.sum(self.ar_coeffs))
        return self.intercept / s if s != 0 else 0.0

    def residuals(self, series=None) -> np.ndarray:
        """One-step in-sample innovations on the differenced scale (length n - d)."""
        x = self.fitted_on if series is None else np.asarray(series, dtype=float)
        w = difference(x, self.order[1])
        cond = min(self.order[0], w.size)
        return css_residuals(w, self.mean, self.ar_coeffs, self.ma_coeffs, cond)

    def one_step_errors(self, series=None) -> np.ndarray:
        """Level-scale one-step-ahead in-sample errors, conditioning values dropped.

        With differencing the level error equals the differenced-scale error.
        """
        e = self.residuals(series)
        return e[min(self.order[0], e.size):]

    def forecast(self, h: int, series=None) -> np.ndarray:
        """Recursive conditional-mean forecasts for horizons 1..h."""
        if h < 1:
            raise ValueError("h must be at least 1")
        x = self.fitted_on if series is None else np.asarray(series, dtype=float)
        p, d, q = self.order
        w = difference(x, d)
        e = self.residuals(x)
        mu = self.mean
        yhist = list(w - mu)
        ehist = list(e)
        out = []
        for _ in range(h):
            val = 0.0
            for i in range(p):
                val += self.ar_coeffs[i] * yhist[-1 - i]
            for j in range(q):
                if len(ehist) - 1 - j >= 0:
                    val += self.ma_coeffs[j] * ehist[-1 - j]
            yhist.append(val)
            ehist.append(0.0)
            out.append(val + mu)
        fc = np.array(out)
        # undo differencing, innermost level first
        levels = [np.asarray(x, dtype=float)]
        for _ in range(d):
            levels.append(np.diff(levels[-1]))
        for k in range(d, 0, -1):
            fc = levels[k - 1][-1] + np.cumsum(fc)
        return fc

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "intercept": self.intercept,
            "ar_coeffs": list(map(float, self.ar_coeffs)),
            "ma_coeffs": list(map(float, self.ma_coeffs)),
            "innovation_variance": self.innovation_variance,
            "aicc": self.aicc,
            "include_intercept": self.include_intercept,
            "cond": self.cond,
        }


def aicc(loglik, k, n_eff):
    if n_eff - k - 1 <= 0:
        return np.inf
    return -2.0 * loglik + 2.0 * k * n_eff / (n_eff - k - 1)


def _hannan_rissanen(y, p, q):
    """Linear-regression start values for ARMA(p, q) on a zero-mean series."""
    n = y.size
    if p == 0 and q == 0:
        return np.zeros(0), np.zeros(0)
    e = np.zeros(n)
    if q > 0:
        L = min(max(p + q + 2, int(np.ceil(np.log(n) ** 2))), n // 3)
        Z = np.column_stack([y[L - i - 1: n - i - 1] for i in range(L)])
        b, *_ = np.linalg.lstsq(Z, y[L:], rcond=None)
        e[L:] = y[L:] - Z @ b
        start = L + q
    else:
        start = p
    start = max(start, p)
    if n - start <= p + q + 1:
        return np.zeros(p), np.zeros(q)
    cols = [y[start - i - 1: n - i - 1] for i in range(p)] + [e[start - j - 1: n - j - 1] for j in range(q)]
    Z = np.column_stack(cols)
    b, *_ = np.linalg.lstsq(Z, y[start:], rcond=None)
    return b[:p], b[p:]


def fit_arima(series, order, include_intercept=True, cond=None, maxiter=500, tol=1e-8) -> ArimaModel:
    """Fit one ARIMA(p, d, q) by maximising the conditional Gaussian likelihood.

    Hannan-Rissanen regressions give start values. Coefficients are searched
    in partial-autocorrelation coordinates, so every iterate is causal and
    invertible.
    """
    x = np.asarray(series, dtype=float)
    p, d, q = map(int, order)
    w = difference(x, d)
    cond = p if cond is None else int(cond)
    n_eff = w.size - cond
    if n_eff < p + q + 2:
        raise SeriesTooShort(f"{x.size} observations are too few for order {order}")
    scale = float(np.std(w)) or 1.0
    floor = 1e-12 * max(float(np.mean(w**2)), 1e-300)

    def unpack(theta):
        i = 0
        mu = 0.0
        if include_intercept:
            mu = theta[0] * scale
            i = 1
        ar = _constrain(theta[i:i + p])
        ma = -_constrain(theta[i + p:i + p + q])
        return mu, ar, ma

    def resid(theta):
        mu, ar, ma = unpack(theta)
        return css_residuals(w, mu, ar, ma, cond)[cond:]

    def negll(theta):
        e = resid(theta)
        s2 = max(float(e @ e) / n_eff, floor)
        return 0.5 * n_eff * (np.log(2 * np.pi * s2) + 1.0)

    mu0 = float(np.mean(w[cond:])) if include_intercept else 0.0
    ar0, ma0 = _hannan_rissanen(w - mu0, p, q)
    theta0 = np.r_[[mu0 / scale] if include_intercept else [], _unconstrain(ar0), _unconstrain(-np.asarray(ma0))]
    if theta0.size == 0:
        theta = theta0
    elif p == 0 and q == 0:
        theta = theta0  # the CSS mean is already the conditional MLE
    else:
        # the concentrated likelihood is monotone in the CSS, so a least-squares
        # solve maximises it; Nelder-Mead is the fallback
        try:
            res = least_squares(resid, theta0, method="lm", xtol=tol, ftol=tol, max_nfev=100 * (theta0.size + 1))
            theta = res.x
        except (ValueError, np.linalg.LinAlgError):
            theta = theta0
        if not np.all(np.isfinite(theta)) or negll(theta) > negll(theta0):
            res = minimize(negll, theta0, method="Nelder-Mead",
                           options={"xatol": tol, "fatol": tol, "maxiter": maxiter})
            theta = res.x if res.fun <= negll(theta0) else theta0
    mu, ar, ma = unpack(theta)
    e = css_residuals(w, mu, ar, ma, cond)[cond:]
    s2 = max(float(e @ e) / n_eff, floor)
    ll = -0.5 * n_eff * (np.log(2 * np.pi * s2) + 1.0)
    k = p + q + 1 + int(include_intercept)
    return ArimaModel(
        order=(p, d, q),
        intercept=float(mu * (1.0 - np.sum(ar))),
        ar_coeffs=np.asarray(ar, dtype=float),
        ma_coeffs=np.asarray(ma, dtype=float),
        innovation_variance=s2,
        aicc=float(aicc(ll, k, n_eff)),
        loglik=float(ll),
        fitted_on=x.copy(),
        include_intercept=include_intercept,
        cond=cond,
        n_params=k,
    )


def select_d(series, max_d=2, alpha=0.05) -> int:
    """Number of differences from augmented Dickey-Fuller tests.

    Difference while the unit-root null is not rejected at ``alpha``. A series
    whose difference is numerically constant (an exact polynomial trend) is
    always differenced.
    """
    from statsmodels.tsa.stattools import adfuller

    x = np.asarray(series, dtype=float)
    d = 0
    while d < max_d:
        v = np.var(x)
        if v == 0 or x.size < 8:
            break
        dx = np.diff(x)
        if np.var(dx) <= 1e-10 * v:
            x, d = dx, d + 1
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                pval = adfuller(x, regression="c", autolag="AIC")[1]
            except (ValueError, np.linalg.LinAlgError):
                break
        if pval <= alpha:
            break
        x, d = dx, d + 1
    return d


def candidate_orders(max_p, max_q):
    return list(itertools.product(range(max_p + 1), range(max_q + 1)))


def _tiebreak(model):
    return (model.aicc, model.n_params, model.order[0], model.order[2])


def fit_auto_arima(series, max_p=3, max_q=3, max_d=2, d=None, return_all=False):
    """Exhaustive AICc search over p <= max_p, q <= max_q after choosing d.

    An intercept (drift when d = 1) is included for d <= 1. Candidates with
    roots within 1.01 of the unit circle, or with an AR/MA root pair closer
    than ``CANCEL_TOL`` (a near common factor, so the same process as a
    smaller model already on the grid), are not admissible. Ties in AICc go to
    fewer parameters, then lower p, then lower q.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 10:
        raise SeriesTooShort(f"need at least 10 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if d is None:
        d = select_d(x, max_d)
    n_w = x.size - d
    max_p = min(max_p, max(n_w // 4, 0))
    max_q = min(max_q, max(n_w // 4, 0))
    cond = max_p
    fits = []
    for p, q in candidate_orders(max_p, max_q):
        try:
            m = fit_arima(x, (p, d, q), include_intercept=d <= 1, cond=cond)
        except SeriesTooShort:
            continue
        if np.isfinite(m.aicc) and roots_ok(m.ar_coeffs, m.ma_coeffs, ADMISSIBLE_ROOT) \
                and not redundant(m.ar_coeffs, m.ma_coeffs):
            fits.append(m)
    if not fits:
        raise NoAdmissibleModel("no candidate satisfied causality and invertibility")
    best = min(fits, key=_tiebreak)
    return (best, fits) if return_all else best
