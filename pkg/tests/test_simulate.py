import numpy as np
import pytest

from intradayfts.curves import CIDR
from intradayfts.errors import UnstableKernel
from intradayfts.fpca import fit_fpca
from intradayfts.simulate import Far1Spec, basis_matrix, simulate_far1


def lag1(x):
    x = x - x.mean()
    return float(x[1:] @ x[:-1] / (x @ x))


def test_panel_invariants():
    p = simulate_far1(Far1Spec(n=20, m=31, seed=1, white_noise_sd=0.1))
    assert p.values.shape == (20, 31) and p.scale_tag == CIDR
    np.testing.assert_array_equal(p.values[:, 0], 0.0)
    assert np.all(np.isfinite(p.values))
    assert p.day_ids[0] == "sim-00001" and p.grid[1] == 15.0


def test_same_seed_same_panel():
    a = simulate_far1(Far1Spec(n=10, m=21, seed=4))
    b = simulate_far1(Far1Spec(n=10, m=21, seed=4))
    c = simulate_far1(Far1Spec(n=10, m=21, seed=5))
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_unstable_kernel():
    with pytest.raises(UnstableKernel):
        Far1Spec(kernel_weights=(0.7, 0.5))
    with pytest.raises(ValueError):
        Far1Spec(kernel_rank=3)


@pytest.mark.parametrize("kind", ["fourier", "polynomial"])
def test_basis_orthonormal_and_anchored(kind):
    B = basis_matrix(41, 5, kind)
    np.testing.assert_allclose(B.T @ B / 41, np.eye(5), atol=1e-10)
    np.testing.assert_allclose(B[0], 0.0, atol=1e-12)


def test_zero_kernel_gives_uncorrelated_scores():
    p = simulate_far1(Far1Spec(n=500, m=51, kernel_weights=(0.0, 0.0), seed=3))
    s = fit_fpca(p, n_components=1).scores[:, 0]
    assert abs(lag1(s)) <= 0.1


def test_first_score_autocorrelation_tracks_dominant_weight():
    p = simulate_far1(Far1Spec(n=1000, m=51, seed=2))
    s = fit_fpca(p, n_components=1).scores[:, 0]
    assert abs(lag1(s) - 0.7) <= 0.1
