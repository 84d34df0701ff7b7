"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.

Run ``pytest tests/test_acceptance.py -v``; the verdict lines are repeated in
the "acceptance criteria" section of the terminal summary.
"""

import hashlib
import time
import warnings
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from oracles import fpca_by_covariance, k_by_delta, subspace_angle_deg
from test_score_forecast import simulate_var1
from intradayfts.arima import fit_auto_arima
from intradayfts.cli import main
from intradayfts.config import ExperimentConfig
from intradayfts.curves import CIDR, RAW_LEVEL, CurvePanel, from_cidr, to_cidr, write_panel_csv
from intradayfts.errors import DegenerateLossDifferential
from intradayfts.fpca import FpcaModel, fit_fpca
from intradayfts.intervals import BootstrapConfig, flr_interval, ts_interval
from intradayfts.metrics import dm_test, interval_score, mcpdc, mme, pointwise_errors
from intradayfts.pipeline import run_pipeline
from intradayfts.robust import fit_robrsvd, fit_robust_fpca
from intradayfts.score_forecast import fit_score_model, fit_var
from intradayfts.simulate import Far1Spec, simulate_far1
from intradayfts.updating import PartialObservation, ols_update, pls_update, rr_update

from conftest import rank_k_panel


def test_criterion_01_fpca_matches_covariance_oracle(verdict):
    t0 = time.perf_counter()
    worst_eig = worst_rec = worst_proj = 0.0
    k_agree = True
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(3, 51)), int(rng.integers(2, 201))
        X = rng.normal(size=(n, m)) * rng.uniform(0.1, 3.0, size=m)
        full = fit_fpca(X, delta=1.0)
        mu, vals, vecs = fpca_by_covariance(X)
        K = full.K
        worst_eig = max(worst_eig, np.max(np.abs(full.eigenvalues - vals[:K])))
        worst_rec = max(worst_rec, np.max(np.abs(full.reconstruct() - X)))
        V = vecs[:, :K]
        oracle_fit = mu + (X - mu) @ V @ V.T
        worst_proj = max(worst_proj, np.max(np.abs(full.fitted() - oracle_fit)))
        k_agree &= fit_fpca(X, 0.9).K == k_by_delta(np.clip(vals, 0, None), 0.9)
    elapsed = time.perf_counter() - t0
    ok = worst_eig <= 1e-10 and worst_rec <= 1e-10 and worst_proj <= 1e-10 and k_agree and elapsed < 10
    verdict(1, ok, f"max |eig diff| {worst_eig:.1e}, reconstruction {worst_rec:.1e}, "
                   f"fitted vs oracle {worst_proj:.1e}, K rule agrees {k_agree}, {elapsed:.2f}s")


def test_criterion_02_cidr_round_trip(verdict):
    rng = np.random.default_rng(2)
    levels = np.exp(rng.normal(3.0, 1.0, size=(1000, 1)) + np.cumsum(0.01 * rng.normal(size=(1000, 60)), axis=1))
    panel = CurvePanel(np.arange(60) * 15.0, levels, [f"c{i}" for i in range(1000)], RAW_LEVEL)
    t0 = time.perf_counter()
    back = from_cidr(to_cidr(panel), levels[:, 0]).values
    elapsed = time.perf_counter() - t0
    rel = float(np.max(np.abs(back - levels) / levels))
    verdict(2, rel <= 1e-12 and elapsed < 1, f"max relative error {rel:.1e} over 1000 curves, {elapsed:.3f}s")


def _random_instance(rng):
    K = int(rng.integers(1, 5))
    m = int(rng.integers(20, 61))
    m0 = int(rng.integers(K + 3, m - 1))
    Q, _ = np.linalg.qr(rng.normal(size=(m, K)))
    model = FpcaModel(rng.normal(size=m), Q, np.ones(K), np.zeros((3, K)), np.zeros((3, m)), np.ones(3), 1.0)
    return model, PartialObservation(rng.normal(size=m0)), rng.normal(size=K)


def test_criterion_03_closed_form_limits(verdict):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = dict(rr_small=0.0, rr_large=0.0, pls_zero=0.0, pls_large=0.0, convex=0.0)
    for _ in range(100):
        model, obs, beta_ts = _random_instance(rng)
        F = model.components[: obs.m0]
        xs = obs.observed - model.mean_curve[: obs.m0]
        ols = ols_update(model, obs).coefficients
        worst["rr_small"] = max(worst["rr_small"], np.linalg.norm(rr_update(model, obs, 1e-12).coefficients - ols))
        big = np.linalg.norm(rr_update(model, obs, 1e12).coefficients) / np.linalg.norm(F.T @ xs)
        worst["rr_large"] = max(worst["rr_large"], big)
        worst["pls_zero"] = max(worst["pls_zero"],
                                np.linalg.norm(pls_update(model, obs, beta_ts, 0.0).coefficients - ols))
        worst["pls_large"] = max(worst["pls_large"],
                                 np.linalg.norm(pls_update(model, obs, beta_ts, 1e12).coefficients - beta_ts))
        # orthonormal observed design: rotate the observed block to have F'F = I
        Qe, _ = np.linalg.qr(rng.normal(size=(obs.m0, model.K)))
        comps = model.components.copy()
        comps[: obs.m0] = Qe
        ortho = FpcaModel(model.mean_curve, comps, model.eigenvalues, model.scores, model.residuals,
                          model.weights, 1.0)
        lam = float(rng.uniform(0.01, 100))
        got = pls_update(ortho, obs, beta_ts, lam).coefficients
        expect = (Qe.T @ xs + lam * beta_ts) / (1 + lam)
        worst["convex"] = max(worst["convex"], np.linalg.norm(got - expect))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and elapsed < 5
    verdict(3, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" over 100 instances, {elapsed:.2f}s")


def test_criterion_04_robustness_gain(verdict):
    t0 = time.perf_counter()
    wins_rob = wins_rsvd = 0
    for s in range(100):
        rng = np.random.default_rng(4000 + s)
        X, Q = rank_k_panel(rng, 100, 60)
        X[rng.choice(100, 5, replace=False)] += 100.0
        base = subspace_angle_deg(fit_fpca(X, n_components=2).components, Q)
        wins_rob += subspace_angle_deg(fit_robust_fpca(X, n_components=2).components, Q) < base
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            wins_rsvd += subspace_angle_deg(fit_robrsvd(X, K=2).components, Q) < base
    elapsed = time.perf_counter() - t0
    ok = wins_rob >= 95 and wins_rsvd >= 95 and elapsed < 60
    verdict(4, ok, f"robust FPCA beats FPCA in {wins_rob}/100, RobRSVD in {wins_rsvd}/100, {elapsed:.1f}s")


def test_criterion_05_score_model_recovery(verdict):
    t0 = time.perf_counter()
    ar_ok = rw_ok = 0
    for s in range(50):
        e = np.random.default_rng(1000 + s).normal(size=700)
        ar = fit_auto_arima(lfilter([1.0], [1.0, -0.8], e)[200:])
        ar_ok += ar.order[1] == 0 and ar.order[0] >= 1 and abs(ar.ar_coeffs[0] - 0.8) <= 0.1
        rw_ok += fit_auto_arima(np.cumsum(e[200:])).order[1] == 1
    A = np.array([[0.5, 0.1], [0.2, 0.4]])
    var_ok = 0
    for s in range(20):
        v = fit_var(simulate_var1(A, 800, 2000 + s), max_order=5)
        var_ok += v.order == 1 and np.max(np.abs(v.coefs[0] - A)) <= 0.1
    elapsed = time.perf_counter() - t0
    ok = ar_ok >= 45 and rw_ok >= 45 and var_ok >= 18 and elapsed < 120
    verdict(5, ok, f"AR(1) phi=0.8 {ar_ok}/50, random walk {rw_ok}/50, VAR(1) {var_ok}/20 "
                   f"(need 90% each), {elapsed:.1f}s")


def test_criterion_06_interval_coverage(verdict):
    t0 = time.perf_counter()
    P = simulate_far1(Far1Spec(n=250, m=101, seed=7, white_noise_sd=0.05)).values
    cfg = BootstrapConfig(B=200, alpha=0.2, rng_seed=11)
    m0 = 50
    ts_cov, flr_cov = [], []
    for i in range(100):
        H, x = P[i:i + 150], P[i + 150]
        model = fit_fpca(H)
        ts_cov.append(ts_interval(model, fit_score_model(model.scores), cfg).covers(x).mean())
        flr_cov.append(flr_interval(H, PartialObservation(x[:m0]), cfg).covers(x[m0:]).mean())
    elapsed = time.perf_counter() - t0
    ts, flr = float(np.mean(ts_cov)), float(np.mean(flr_cov))
    ok = 0.68 <= ts <= 0.92 and 0.68 <= flr <= 0.92 and elapsed < 300
    verdict(6, ok, f"80% band coverage TS {ts:.3f}, FLR {flr:.3f} over 100 days, {elapsed:.1f}s")


def test_criterion_07_updating_beats_ts(verdict, tmp_path):
    # One random amplitude per day: the morning pins down the afternoon, while
    # the day-to-day amplitudes are independent so the TS forecast cannot.
    rng = np.random.default_rng(7)
    n, m = 125, 101
    t = np.linspace(0.0, 1.0, m)
    X = np.outer(3.0 * rng.normal(size=n), np.sin(np.pi * t)) + 0.05 * rng.normal(size=(n, m))
    X[:, 0] = 0.0
    path = tmp_path / "panel.csv"
    write_panel_csv(CurvePanel(np.arange(m) * 15.0, X, [f"d{i:03d}" for i in range(n)], CIDR), path)
    cfg = ExperimentConfig(input=str(path), updaters=("TS", "PLS", "FLR"), m0_blocks=(m // 2,), bands=False,
                           out=str(tmp_path / "out"))
    run_pipeline(cfg)
    header, row = (tmp_path / "out" / "metrics.csv").read_text().splitlines()[:2]
    vals = dict(zip(header.split(","), map(float, row.split(","))))
    ts, pls, flr = vals["TS_MSFE"], vals["PLS_MSFE"], vals["FLR_MSFE"]
    ok = pls < 0.5 * ts and flr < 0.5 * ts
    verdict(7, ok, f"remainder MSFE at m0={m // 2}: TS {ts:.4f}, PLS {pls:.4f} ({pls / ts:.1%}), "
                   f"FLR {flr:.4f} ({flr / ts:.1%}) over 40 test days")


def test_criterion_08_metric_formulas(verdict):
    t0 = time.perf_counter()
    checks = {}
    a = np.random.default_rng(8).normal(size=(6, 4))
    s = pointwise_errors(a, a)
    checks["perfect forecast"] = not s.mafe.any() and not s.msfe.any()
    s = pointwise_errors(a, a + 2)
    checks["offset 2"] = np.allclose(s.mafe, 2) and np.allclose(s.msfe, 4)
    s = pointwise_errors([[0.0], [0.0]], [[1.0], [-1.0]])
    checks["errors +-1"] = s.mafe[0] == 1 and s.msfe[0] == 1
    z = np.zeros((4, 3))
    checks["MME zero"] = all(not v.any() for v in mme(z, z))
    u, o = mme(z, z + 0.25)
    checks["MME over 0.25"] = np.all(u == 0.25) and np.all(o == 0.5)
    u, o = mme(z, z - 0.25)
    checks["MME under 0.25"] = np.all(u == 0.5) and np.all(o == 0.25)
    sgn = np.array([[1.0], [1.0], [-1.0], [-1.0]])
    checks["MCPDC same"] = mcpdc(sgn, 3 * sgn)[0] == 100
    checks["MCPDC flipped"] = mcpdc(sgn, -sgn)[0] == 0
    checks["MCPDC half"] = mcpdc(sgn, np.array([[1.0], [-1.0], [-1.0], [1.0]]))[0] == 50
    checks["IS inside"] = interval_score(-1.0, 2.0, 0.3) == 3.0
    checks["IS x=1.5"] = interval_score(0.0, 1.0, 1.5, 0.2) == 6.0
    checks["IS degenerate"] = interval_score(2.0, 2.0, 2.0) == 0.0
    try:
        dm_test(np.arange(12.0), np.arange(12.0))
        checks["DM degenerate"] = False
    except DegenerateLossDifferential:
        checks["DM degenerate"] = True
    rng = np.random.default_rng(1000)
    lb = rng.normal(5.0, 1.0, 1000)
    la = lb - 1.0 + 0.1 * rng.normal(size=1000)
    stat, p = dm_test(la, lb, "a_less")
    checks["DM better by 1"] = stat < -10 and p < 1e-6
    checks["DM antisymmetric"] = dm_test(lb, la)[0] == -dm_test(la, lb)[0]
    elapsed = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not v]
    verdict(8, not failed and elapsed < 1,
            f"{len(checks) - len(failed)}/{len(checks)} examples exact"
            + (f", failing: {failed}" if failed else "") + f", {elapsed:.3f}s")


def _digests(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(Path(folder).iterdir())}


def test_criterion_09_evaluate_is_deterministic(verdict, tmp_path):
    args = ["evaluate", "--simulate", "--sim-n", "60", "--sim-m", "101", "--B", "100", "--seed", "5"]
    codes = [main(args + ["--out", str(tmp_path / run)]) for run in ("first", "second")]
    a, b = _digests(tmp_path / "first"), _digests(tmp_path / "second")
    expected = {"metrics.csv", "summary.json", "dm_test.json", "lambda_rr.json", "lambda_pls.json",
                "ts_forecasts.csv", "bands.csv", "config.txt"}
    same = [k for k in a if a[k] == b.get(k)]
    ok = codes == [0, 0] and set(a) == expected and a == b
    verdict(9, ok, f"exit codes {codes}, {len(same)}/{len(expected)} report files byte-identical")


def test_criterion_10_dm_protocol(verdict):
    rng = np.random.default_rng(10)
    days, m = 40, 50
    actual = rng.normal(size=(days, m)).cumsum(axis=1)
    err = rng.normal(size=(days, m))
    fc_b = actual + err
    fc_a = actual + 0.5 * err  # pointwise smaller error on every day
    results = {}
    for name, loss in (("squared", np.square), ("absolute", np.abs)):
        la = loss(fc_a - actual).mean(axis=1)
        lb = loss(fc_b - actual).mean(axis=1)
        results[name] = dm_test(la, lb, "a_less")
    ok = all(p < 0.01 for _, p in results.values())
    verdict(10, ok, ", ".join(f"{k} loss stat {s:.2f} p {p:.1e}" for k, (s, p) in results.items())
            + f" over {days} days")
