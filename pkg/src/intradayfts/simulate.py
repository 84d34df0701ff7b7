"""Synthetic functional AR(1) panels with a finite-rank kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import CIDR, CurvePanel
from .errors import UnstableKernel

BURN_IN = 200


@dataclass(frozen=True)
class Far1Spec:
    """FAR(1) simulation settings.

    Curves follow ``X_{i+1} = sum_k w_k <X_i, b_k> b_k + eps_{i+1}`` where the
    ``b_k`` are orthonormal basis functions vanishing at the first grid point
    and the noise ``eps`` has coefficient standard deviation ``noise_sd / k``
    on basis function k. ``white_noise_sd`` adds independent pointwise
    observation noise outside the recursion.
    """

    n: int = 150
    m: int = 101
    kernel_rank: int = 2
    kernel_weights: tuple = (0.7, 0.2)
    basis: str = "fourier"
    noise_sd: float = 1.0
    seed: int = 0
    white_noise_sd: float = 0.0
    n_basis: int | None = None
    tick_seconds: float = 15.0

    def __post_init__(self):
        w = tuple(float(x) for x in self.kernel_weights)
        object.__setattr__(self, "kernel_weights", w)
        if len(w) != self.kernel_rank:
            raise ValueError("kernel_weights must have kernel_rank entries")
        if np.sum(np.abs(w)) >= 1:
            raise UnstableKernel(f"sum of |weights| is {np.sum(np.abs(w)):.3g}; must be below 1")
        if self.basis not in ("fourier", "polynomial"):
            raise ValueError("basis must be 'fourier' or 'polynomial'")
        if self.n < 1 or self.m < 3:
            raise ValueError("need n >= 1 and m >= 3")
        if self.noise_sd <= 0 or self.white_noise_sd < 0:
            raise ValueError("noise standard deviations must be positive (white noise may be 0)")

    @property
    def L(self) -> int:
        return self.n_basis or max(self.kernel_rank, 5)


def basis_matrix(m: int, L: int, kind: str = "fourier") -> np.ndarray:
    """m x L basis on [0, 1], zero at t = 0, orthonormal for ``<f, g> = mean(f g)``."""
    t = np.linspace(0.0, 1.0, m)
    k = np.arange(1, L + 1)
    if kind == "fourier":
        raw = np.sin(np.pi * np.outer(t, k))
    else:
        raw = t[:, None] ** k
    if L > m - 1:
        raise ValueError(f"cannot build {L} basis functions on {m} points")
    Q, R = np.linalg.qr(raw)
    Q = Q * np.sign(np.diag(R))
    return Q * np.sqrt(m)


def simulate_far1(spec: Far1Spec) -> CurvePanel:
    rng = np.random.default_rng(spec.seed)
    L, m = spec.L, spec.m
    Bm = basis_matrix(m, L, spec.basis)
    w = np.zeros(L)
    w[: spec.kernel_rank] = spec.kernel_weights
    sd = spec.noise_sd / np.arange(1, L + 1)
    total = spec.n + BURN_IN
    coef = np.zeros(L)
    out = np.empty((spec.n, m))
    for i in range(total):
        coef = w * coef + sd * rng.standard_normal(L)
        if i >= BURN_IN:
            out[i - BURN_IN] = Bm @ coef
    if spec.white_noise_sd > 0:
        out += spec.white_noise_sd * rng.standard_normal(out.shape)
    out -= out[:, :1]
    grid = np.arange(m) * float(spec.tick_seconds)
    days = [f"sim-{i + 1:05d}" for i in range(spec.n)]
    return CurvePanel(grid, out, days, CIDR)
