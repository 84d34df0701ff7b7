"""Functional principal component decomposition of curve panels.

Curves are treated as vectors on the grid with an unweighted Euclidean inner
product, so FPCA reduces to PCA of the n x m data matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .curves import CIDR, CurvePanel
from .errors import AllZero, DegeneratePanel, ScaleError

ZERO_EIG_RTOL = 1e-14


@dataclass(frozen=True)
class FpcaModel:
    """Mean, retained components and scores of a decomposed panel.

    ``components`` is m x K with one component per column; ``scores`` is n x K.
    The identity ``mean + scores @ components.T + residuals == data`` holds for
    every fitter in the package.
    """

    mean_curve: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    residuals: np.ndarray
    weights: np.ndarray
    variance_fraction: float
    method: str = "fpca"
    delta: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    @property
    def K(self) -> int:
        return self.components.shape[1]

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def m(self) -> int:
        return self.mean_curve.size

    def fitted(self) -> np.ndarray:
        return self.mean_curve + self.scores @ self.components.T

    def reconstruct(self) -> np.ndarray:
        return self.fitted() + self.residuals

    def curve(self, scores) -> np.ndarray:
        """Curve implied by a score vector (or a stack of them)."""
        return self.mean_curve + np.asarray(scores) @ self.components.T

    def project(self, curves) -> np.ndarray:
        return (np.atleast_2d(curves) - self.mean_curve) @ self.components

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "delta": self.delta,
            "K": self.K,
            "variance_fraction": self.variance_fraction,
            "mean_curve": self.mean_curve.tolist(),
            "components": self.components.T.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "scores": self.scores.tolist(),
            "residuals": self.residuals.tolist(),
            "weights": self.weights.tolist(),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "FpcaModel":
        K = int(d["K"])
        m = len(d["mean_curve"])
        comps = np.array(d["components"], dtype=float).reshape(K, m).T
        scores = np.array(d["scores"], dtype=float).reshape(-1, K)
        return cls(
            mean_curve=np.array(d["mean_curve"], dtype=float),
            components=comps,
            eigenvalues=np.array(d["eigenvalues"], dtype=float),
            scores=scores,
            residuals=np.array(d["residuals"], dtype=float).reshape(scores.shape[0], m),
            weights=np.array(d["weights"], dtype=float),
            variance_fraction=float(d["variance_fraction"]),
            method=d.get("method", "fpca"),
            delta=d.get("delta"),
            meta=d.get("meta", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "FpcaModel":
        return cls.from_dict(json.loads(text))


def panel_values(panel, require_cidr=True) -> np.ndarray:
    if isinstance(panel, CurvePanel):
        if require_cidr and panel.scale_tag != CIDR:
            raise ScaleError("decomposition expects a cidr panel; apply to_cidr first")
        return np.asarray(panel.values, dtype=float)
    X = np.asarray(panel, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected an n x m matrix of curves")
    return X


def select_k(eigs, delta: float = 0.9) -> int:
    """Smallest K whose leading eigenvalues explain at least ``delta`` of the
    positive-eigenvalue total."""
    eigs = np.asarray(eigs, dtype=float)
    pos = np.where(eigs > 0, eigs, 0.0)
    total = pos.sum()
    if total <= 0:
        raise AllZero("all eigenvalues are zero")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    ratio = np.cumsum(pos) / total
    k = int(np.argmax(ratio >= delta - 1e-12)) + 1
    return min(k, int(np.count_nonzero(pos)))


def align_signs(components: np.ndarray, scores: np.ndarray):
    """Flip each component so its entry of largest magnitude is positive."""
    comps = components.copy()
    sc = scores.copy()
    for k in range(comps.shape[1]):
        j = np.argmax(np.abs(comps[:, k]))
        if comps[j, k] < 0:
            comps[:, k] *= -1
            sc[:, k] *= -1
    return comps, sc


def weighted_pca(X, weights, delta=0.9, n_components=None, method="fpca"):
    """PCA with 0/1 (or general nonnegative) curve weights; scores for all rows."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, m = X.shape
    wsum = w.sum()
    if np.count_nonzero(w) < 2:
        raise DegeneratePanel("fewer than two curves carry weight")
    mu = (w @ X) / wsum
    C = X - mu
    S = np.sqrt(w)[:, None] * C
    _, s, Vt = np.linalg.svd(S, full_matrices=False)
    eigs_all = s**2 / (wsum - 1.0)
    trace = eigs_all.sum()
    if trace <= 0 or np.all(eigs_all <= ZERO_EIG_RTOL * trace):
        raise DegeneratePanel("panel has no variation")
    eigs_all = np.where(eigs_all > ZERO_EIG_RTOL * trace, eigs_all, 0.0)
    if n_components is None:
        K = select_k(eigs_all, delta)
    else:
        K = int(n_components)
        npos = int(np.count_nonzero(eigs_all))
        if not 1 <= K <= npos:
            raise ValueError(f"n_components={K} outside 1..{npos}")
    comps = Vt[:K].T
    scores = C @ comps
    comps, scores = align_signs(comps, scores)
    resid = X - mu - scores @ comps.T
    return FpcaModel(
        mean_curve=mu,
        components=comps,
        eigenvalues=eigs_all[:K].copy(),
        scores=scores,
        residuals=resid,
        weights=w.copy(),
        variance_fraction=float(eigs_all[:K].sum() / eigs_all.sum()),
        method=method,
        delta=delta,
    )


def fit_fpca(panel, delta: float = 0.9, n_components: int | None = None) -> FpcaModel:
    """Standard FPCA; ``n_components`` overrides the variance-fraction rule."""
    X = panel_values(panel)
    if X.shape[0] < 3:
        raise DegeneratePanel("need at least three curves")
    return weighted_pca(X, np.ones(X.shape[0]), delta, n_components, "fpca")


def subspace_angle(A, B) -> float:
    """Largest principal angle in degrees between the column spaces of A and B."""
    return float(np.degrees(scipy.linalg.subspace_angles(np.asarray(A, float), np.asarray(B, float)).max()))
