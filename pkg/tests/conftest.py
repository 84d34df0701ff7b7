import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from intradayfts.curves import CIDR, CurvePanel  # noqa: E402


def make_panel(values, scale_tag=CIDR, step=15.0):
    values = np.asarray(values, dtype=float)
    grid = np.arange(values.shape[1]) * step
    days = [f"d{i:04d}" for i in range(values.shape[0])]
    return CurvePanel(grid, values, days, scale_tag)


def rank_k_panel(rng, n, m, K=2, sd=(3.0, 1.5), noise=0.05):
    """Low-rank curves with small noise; returns (values, true components)."""
    t = np.linspace(0, 1, m)
    basis = np.column_stack([np.sin((k + 1) * np.pi * t) for k in range(K)])
    Q, _ = np.linalg.qr(basis)
    scores = rng.normal(size=(n, K)) * np.asarray(sd[:K])
    X = scores @ Q.T + noise * rng.normal(size=(n, m))
    return X, Q


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one acceptance criterion and fail the test if it did not pass."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
