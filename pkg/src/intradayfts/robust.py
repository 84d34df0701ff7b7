"""Robust decompositions: trimmed (weighted) FPCA and RobRSVD."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroResiduals, DegeneratePanel, NoConvergenceWarning
from .fpca import FpcaModel, align_signs, fit_fpca, panel_values, weighted_pca

PENALTY_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


@dataclass(frozen=True)
class RobustConfig:
    """Tuning for the robust fitters.

    A RobRSVD penalty of ``None`` is selected by robust GCV over
    :data:`PENALTY_GRID`. The score (day-direction) penalty defaults to a fixed
    1.0: GCV drives it toward zero, and without it the cellwise Huber loss
    cannot stop whole-curve outliers from being absorbed by one huge score.
    The same penalty bends the fitted scores, which dents a component where a
    single cell is down-weighted; use ``penalty_u=0`` when contamination is
    cellwise rather than whole-curve.
    """

    lambda_rob: float = 2.33
    huber_theta: float = 1.345
    penalty_u: float | None = 1.0
    penalty_v: float | None = None
    max_iter: int = 200
    tol: float = 1e-8

    def __post_init__(self):
        if self.lambda_rob <= 0:
            raise ValueError("lambda_rob must be positive")
        if self.huber_theta <= 0:
            raise ValueError("huber_theta must be positive")
        for p in (self.penalty_u, self.penalty_v):
            if p is not None and p < 0:
                raise ValueError("penalties must be nonnegative")


def nmad_scale(residuals) -> float:
    """Median of the nonzero absolute residuals divided by 0.675."""
    r = np.abs(np.asarray(residuals, dtype=float)).ravel()
    r = r[r != 0]
    if r.size == 0:
        raise AllZeroResiduals("every residual is zero")
    return float(np.median(r) / 0.675)


def projection_pursuit(X, K):
    """Robust principal directions by maximising the MAD of projections.

    Candidate directions are the (deflated) centred curves themselves. The
    centre is the columnwise median.
    """
    center = np.median(X, axis=0)
    Y = X - center
    m = X.shape[1]
    comps = np.zeros((m, K))
    for k in range(K):
        norms = np.linalg.norm(Y, axis=1)
        ok = norms > 1e-12 * max(norms.max(), 1e-300)
        if not ok.any():
            raise DegeneratePanel("no variation left for projection pursuit")
        cand = Y[ok] / norms[ok, None]
        proj = Y @ cand.T
        spread = 1.4826 * np.median(np.abs(proj - np.median(proj, axis=0)), axis=0)
        d = cand[int(np.argmax(spread))]
        comps[:, k] = d
        Y = Y - np.outer(Y @ d, d)
    scores = (X - center) @ comps
    return center, comps, scores


def fit_robust_fpca(panel, cfg: RobustConfig | None = None, delta: float = 0.9,
                    n_components: int | None = None) -> FpcaModel:
    """Two-step robust FPCA with hard trimming.

    An initial projection-pursuit fit gives each curve an integrated squared
    error v_i; curves with v_i >= s + lambda_rob * sqrt(s), s = median(v), get
    weight 0 and the FPCA is refitted on the rest. Scores and residuals are
    returned for every curve.
    """
    cfg = cfg or RobustConfig()
    X = panel_values(panel)
    if X.shape[0] < 3:
        raise DegeneratePanel("need at least three curves")
    if n_components is None:
        K0 = fit_fpca(X, delta).K
    else:
        K0 = int(n_components)
    center, comps, scores = projection_pursuit(X, K0)
    v = np.sum((X - center - scores @ comps.T) ** 2, axis=1)
    s = np.median(v)
    w = (v < s + cfg.lambda_rob * np.sqrt(s)).astype(float)
    if np.isinf(cfg.lambda_rob):
        w[:] = 1.0
    model = weighted_pca(X, w, delta, n_components, "robust_fpca")
    model.meta.update({"lambda_rob": cfg.lambda_rob, "isd": v.tolist(), "n_trimmed": int((w == 0).sum())})
    return model


def _scale_or_one(resid):
    try:
        return nmad_scale(resid)
    except AllZeroResiduals:
        return 1.0


def second_difference_penalty(size: int) -> np.ndarray:
    """Omega = D2' D2 for the second-difference operator on ``size`` points."""
    if size < 3:
        return np.zeros((size, size))
    D = np.diff(np.eye(size), n=2, axis=0)
    return D.T @ D


def _huber_weights(r, sigma, theta):
    a = np.abs(r) / sigma
    w = np.ones_like(a)
    big = a > theta
    w[big] = theta / a[big]
    return w


def _huber_loss(r, sigma, theta):
    a = np.abs(r) / sigma
    return np.where(a <= theta, a**2, 2 * theta * a - theta**2)


@dataclass
class _RankOne:
    u: np.ndarray
    v: np.ndarray
    converged: bool
    n_iter: int
    gcv: float


def _rank_one(R, u, v, lam_u, lam_v, Om_u, Om_v, theta, max_iter, tol) -> _RankOne:
    n, m = R.shape
    In, Im = np.eye(n), np.eye(m)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        u_old, v_old = u, v
        resid = R - np.outer(u, v)
        try:
            sigma = nmad_scale(resid)
        except AllZeroResiduals:
            converged = True
            break
        W = _huber_weights(resid, sigma, theta)
        uu, uOu = u @ u, u @ Om_u @ u
        A_v = lam_u * uOu * Im + (lam_v * uu + lam_u * lam_v * uOu) * Om_v
        v = np.linalg.solve(np.diag(W.T @ (u**2)) + A_v, (W * R).T @ u)
        vv, vOv = v @ v, v @ Om_v @ v
        A_u = lam_v * vOv * In + (lam_u * vv + lam_u * lam_v * vOv) * Om_u
        u = np.linalg.solve(np.diag(W @ (v**2)) + A_u, (W * R) @ v)
        old2 = (u_old @ u_old) * (v_old @ v_old)
        diff2 = (u @ u) * (v @ v) + old2 - 2 * (u @ u_old) * (v @ v_old)
        if old2 > 0 and np.sqrt(max(diff2, 0.0) / old2) < tol:
            converged = True
            break
    return _RankOne(u, v, converged, it, np.nan)


def _robust_gcv(R, u, v, lam_u, lam_v, Om_u, Om_v, theta, sigma):
    n, m = R.shape
    resid = R - np.outer(u, v)
    W = _huber_weights(resid, sigma, theta)
    uu, uOu, vv, vOv = u @ u, u @ Om_u @ u, v @ v, v @ Om_v @ v
    Dv = np.diag(W.T @ (u**2))
    Du = np.diag(W @ (v**2))
    A_v = lam_u * uOu * np.eye(m) + (lam_v * uu + lam_u * lam_v * uOu) * Om_v
    A_u = lam_v * vOv * np.eye(n) + (lam_u * vv + lam_u * lam_v * vOv) * Om_u
    df_v = np.trace(np.linalg.solve(Dv + A_v, Dv))
    df_u = np.trace(np.linalg.solve(Du + A_u, Du))
    df = df_u + df_v - 1.0
    N = n * m
    if df >= N:
        return np.inf
    loss = sigma**2 * _huber_loss(resid, sigma, theta).sum() / N
    return float(loss / (1.0 - df / N) ** 2)


def fit_robrsvd(panel, cfg: RobustConfig | None = None, K: int = 1, strict: bool = False) -> FpcaModel:
    """Robust regularised SVD with K sequential rank-one Huber fits.

    The columnwise median is removed first. Each rank-one pair is found by
    alternating penalised IRLS u- and v-steps, re-estimating the NMAD scale
    every sweep; the residual matrix is then deflated. A pair that does not
    converge emits :class:`NoConvergenceWarning` (or raises with
    ``strict=True``) and is kept as is; ``meta["converged"]`` records the
    per-pair flags.
    """
    from .errors import NoConvergence

    cfg = cfg or RobustConfig()
    X = panel_values(panel)
    n, m = X.shape
    if K < 1:
        raise ValueError("K must be at least 1")
    center = np.median(X, axis=0)
    R = X - center
    if not np.any(R):
        raise DegeneratePanel("panel has no variation about its median")
    Om_u = second_difference_penalty(n)
    Om_v = second_difference_penalty(m)
    lam_u_grid = PENALTY_GRID if cfg.penalty_u is None else (cfg.penalty_u,)
    lam_v_grid = PENALTY_GRID if cfg.penalty_v is None else (cfg.penalty_v,)
    U, V, flags, lams = [], [], [], []
    for k in range(K):
        _, pp, _ = projection_pursuit(R, 1)
        v0 = pp[:, 0]
        u0 = R @ v0
        best = None
        sigma0 = None
        for lu in lam_u_grid:
            for lv in lam_v_grid:
                fit = _rank_one(R, u0, v0, lu, lv, Om_u, Om_v, cfg.huber_theta, cfg.max_iter, cfg.tol)
                if len(lam_u_grid) * len(lam_v_grid) > 1:
                    if sigma0 is None:
                        sigma0 = _scale_or_one(R - np.outer(u0, v0))
                    fit.gcv = _robust_gcv(R, fit.u, fit.v, lu, lv, Om_u, Om_v, cfg.huber_theta, sigma0)
                if best is None or fit.gcv < best[0].gcv:
                    best = (fit, lu, lv)
        fit, lu, lv = best
        if not fit.converged:
            if strict:
                raise NoConvergence(k + 1)
            warnings.warn(f"RobRSVD rank-one fit {k + 1} hit max_iter", NoConvergenceWarning, stacklevel=2)
        U.append(fit.u)
        V.append(fit.v)
        flags.append(bool(fit.converged))
        lams.append((lu, lv))
        R = R - np.outer(fit.u, fit.v)
    U, V = np.column_stack(U), np.column_stack(V)
    norms = np.linalg.norm(V, axis=0)
    norms[norms == 0] = 1.0
    comps = V / norms
    scores = U * norms
    comps, scores = align_signs(comps, scores)
    eig = (scores**2).sum(axis=0) / max(n - 1, 1)
    order = np.argsort(-eig, kind="stable")
    comps, scores, eig = comps[:, order], scores[:, order], eig[order]
    resid = X - center - scores @ comps.T
    total = np.sum((X - center) ** 2)
    return FpcaModel(
        mean_curve=center,
        components=comps,
        eigenvalues=eig,
        scores=scores,
        residuals=resid,
        weights=np.ones(n),
        variance_fraction=float(1.0 - np.sum(resid**2) / total),
        method="robrsvd",
        delta=None,
        meta={"converged": [flags[i] for i in order], "penalties": [lams[i] for i in order],
              "huber_theta": cfg.huber_theta},
    )
