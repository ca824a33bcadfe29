import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import autocov_loop, evr_hand, jacobi_eigh
from densityfts.errors import DomainError
from densityfts.ftsa import (
    CovSurface,
    autocov,
    fpca,
    kernel_weight,
    longrun_cov,
    mfpca_stack,
    parse_k_rule,
    plugin_bandwidth,
    select_K_evr,
)
from densityfts.panel import AgeGrid


def test_autocov_one_point_hand_case():
    x = np.array([[1.0], [-1.0]])
    assert autocov(x, 0).values[0, 0] == pytest.approx(1.0)
    assert autocov(x, 1).values[0, 0] == pytest.approx(-0.5)
    with pytest.raises(DomainError):
        autocov(x, 2)


def test_autocov_matches_loop(rng):
    x = rng.standard_normal((9, 4))
    for lag in (-3, -1, 0, 2, 5):
        np.testing.assert_allclose(autocov(x, lag).values, autocov_loop(x.tolist(), lag), atol=1e-14)


def test_autocov_negative_lag_is_transpose(rng):
    x = rng.standard_normal((12, 5))
    np.testing.assert_allclose(autocov(x, -3).values, autocov(x, 3).values.T)
    g0 = autocov(x, 0).values
    np.testing.assert_allclose(g0, g0.T)
    assert np.linalg.eigvalsh(g0).min() >= -1e-12


def test_kernels():
    assert kernel_weight(0.0) == 1.0 and kernel_weight(1.0) == 0.0 and kernel_weight(0.25) == 0.75
    assert kernel_weight(0.4, "flat_top") == 1.0 and kernel_weight(0.75, "flat_top") == pytest.approx(0.5)
    with pytest.raises(DomainError):
        kernel_weight(0.1, "parzen")


def test_longrun_bartlett_b1_is_gamma0(rng):
    x = rng.standard_normal((20, 6))
    np.testing.assert_allclose(longrun_cov(x, "bartlett", 1.0).values, autocov(x, 0).values, atol=1e-15)


def test_longrun_one_point_hand_case():
    x = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    g0 = autocov(x, 0).values[0, 0]
    g1 = autocov(x, 1).values[0, 0]
    out = longrun_cov(x, "bartlett", 2.0).values[0, 0]
    assert out == pytest.approx(g0 + 2 * 0.5 * g1)
    # the two-point series of the hand example: 1 + 2 (1/2)(-0.5) = 0.5
    assert 1.0 + 2 * 0.5 * -0.5 == 0.5


def test_longrun_matches_loop_sum(rng):
    x = rng.standard_normal((15, 3))
    b = 3.7
    expected = np.zeros((3, 3))
    for lag in range(-14, 15):
        expected += max(0.0, 1 - abs(lag) / b) * np.array(autocov_loop(x.tolist(), lag))
    np.testing.assert_allclose(longrun_cov(x, "bartlett", b).values, expected, atol=1e-13)


def test_longrun_errors(rng):
    with pytest.raises(DomainError):
        longrun_cov(rng.standard_normal((3, 2)))
    with pytest.raises(DomainError):
        longrun_cov(rng.standard_normal((10, 2)), bandwidth=0.0)
    with pytest.raises(DomainError):
        longrun_cov(rng.standard_normal((10, 2)), bandwidth="auto")


def test_longrun_symmetric(rng):
    x = np.cumsum(rng.standard_normal((40, 7)), axis=0)
    c = longrun_cov(x, "flat_top", "plugin").values
    assert np.array_equal(c, c.T)


@pytest.mark.slow
def test_plugin_close_to_gamma0_on_iid_noise():
    # iid Brownian-motion curves: the usual smooth functional white noise
    grid = AgeGrid(np.linspace(0.0, 1.0, 21))
    errs = []
    for seed in range(100):
        x = np.cumsum(np.random.default_rng(seed).standard_normal((500, 21)), axis=1) / np.sqrt(21)
        g0 = autocov(x, 0, grid.weights).values
        c = longrun_cov(x, "bartlett", "plugin", grid.weights).values
        errs.append(np.linalg.norm(c - g0) / np.linalg.norm(g0))
    assert np.mean(errs) <= 0.15


def test_plugin_grows_with_persistence(rng):
    e = rng.standard_normal((300, 3))
    ar = np.zeros_like(e)
    for t in range(1, 300):
        ar[t] = 0.9 * ar[t - 1] + e[t]
    assert plugin_bandwidth(ar) > plugin_bandwidth(e)
    assert 1.0 <= plugin_bandwidth(e) <= 75.0


def test_evr_hand_cases():
    assert select_K_evr([5, 4, 1.2, 0.1], 100) == 2
    assert select_K_evr([10, 1, 0.5, 0.2], 100) == 1
    assert select_K_evr([3.0, 0.0, 0.0], 50) == 1
    assert select_K_evr([3.0], 50) == 1
    assert 1 / np.log(100) == pytest.approx(0.2171, abs=1e-4)


def test_evr_errors():
    with pytest.raises(DomainError):
        select_K_evr([0.0, 0.0], 10)
    with pytest.raises(DomainError):
        select_K_evr([1.0, 2.0], 10)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(1e-3, 50), min_size=2, max_size=12).map(lambda v: sorted(v, reverse=True)),
    st.integers(60, 500),
    st.floats(0.05, 1.0),
)
def test_evr_matches_hand_oracle_and_scale(theta, T, c):
    assert select_K_evr(theta, T) == evr_hand(theta, T)
    # delta is 1/ln(T) for both spectra because every theta is below T
    assert select_K_evr([c * t for t in theta], T) == select_K_evr(theta, T)


def test_evr_ratio_equal_to_delta_is_admissible():
    T = 100
    delta = 1.0 / np.log(T)
    # ratios: exactly delta at k=1, 0.5 at k=2, below delta at k=3; kappa_max = 3
    theta = [1.0, delta, 0.5 * delta] + [1e-3] * 20
    assert select_K_evr(theta, T) == evr_hand(theta, T) == 1


def test_evr_flat_spectrum():
    assert select_K_evr([0.05, 0.05, 0.05], 60) == evr_hand([0.05, 0.05, 0.05], 60) == 1


def test_parse_k_rule():
    assert parse_k_rule("evr") == "evr"
    assert parse_k_rule("fixed:6") == 6 == parse_k_rule(("fixed", 6)) == parse_k_rule(6)
    for bad in ("fixed:0", "fixed:x", "pca", True):
        with pytest.raises(DomainError):
            parse_k_rule(bad)


def weighted_oracle(c, w):
    sw = np.sqrt(w)
    lam, vec = jacobi_eigh((sw[:, None] * c * sw[None, :]).tolist())
    return lam, (vec / sw[:, None]).T


def test_fpca_matches_jacobi_oracle(rng):
    for _ in range(25):
        p = int(rng.integers(2, 9))
        grid = AgeGrid(np.sort(rng.uniform(0, 10, p)) + np.arange(p))
        a = rng.standard_normal((p, p))
        c = a @ a.T
        x = rng.standard_normal((6, p))
        model = fpca(CovSurface(c, grid.weights), x, p)
        lam, phi = weighted_oracle(c, grid.weights)
        np.testing.assert_allclose(model.eigenvalues, lam, rtol=1e-8, atol=1e-8 * lam[0])
        for k in range(p):
            if k and abs(lam[k] - lam[k - 1]) < 1e-6 * lam[0]:
                continue
            dot = np.dot(model.eigenfunctions[k] * grid.weights, phi[k])
            assert abs(abs(dot) - 1.0) < 1e-8


def test_fpca_rank_one(rng):
    grid = AgeGrid(range(12))
    phi = np.sin(np.linspace(0, np.pi, 12))
    phi /= np.sqrt(grid.inner(phi, phi))
    model = fpca(CovSurface(3.5 * np.outer(phi, phi), grid.weights), rng.standard_normal((8, 12)), "evr")
    assert model.K == 1
    assert model.eigenvalues[0] == pytest.approx(3.5)
    np.testing.assert_allclose(np.abs(model.eigenfunctions[0]), np.abs(phi), atol=1e-10)
    np.testing.assert_allclose(model.eigenvalues[1:], 0.0, atol=1e-12)


def test_fpca_invariants(rng):
    grid = AgeGrid(range(20))
    x = np.cumsum(rng.standard_normal((40, 20)), axis=1)
    model = fpca(longrun_cov(x, weights=grid.weights), x, "fixed:6")
    assert model.K == 6
    gram = (model.eigenfunctions * grid.weights) @ model.eigenfunctions.T
    np.testing.assert_allclose(gram, np.eye(20), atol=1e-8)
    assert np.all(np.diff(model.eigenvalues) <= 1e-12) and np.all(model.eigenvalues >= 0)
    expected = ((x - x.mean(axis=0)) * grid.weights) @ model.eigenfunctions[:6].T
    np.testing.assert_allclose(model.scores, expected, atol=1e-10)
    mse = []
    for k in range(0, 21, 2):
        m = fpca(longrun_cov(x, weights=grid.weights), x, k) if k else None
        rec = m.reconstruct() if m else np.broadcast_to(x.mean(axis=0), x.shape)
        mse.append(float(np.mean(((x - rec) ** 2) @ grid.weights)))
    assert all(b <= a + 1e-10 for a, b in zip(mse, mse[1:]))


def test_fixed_six_regardless_of_spectrum(rng):
    x = rng.standard_normal((30, 10))
    x[:, 0] *= 100
    assert fpca(longrun_cov(x), x, "fixed:6").K == 6


def test_mfpca_identical_genders(rng):
    x = np.cumsum(rng.standard_normal((30, 8)), axis=0)
    m = mfpca_stack(x, x, "fixed:2", bandwidth=2.0)
    for k in range(2):
        np.testing.assert_allclose(m.eigenfunctions[k, :8], m.eigenfunctions[k, 8:], atol=1e-10)
    recon = m.reconstruct()
    np.testing.assert_allclose(recon[:, :8] - x, recon[:, 8:] - x, atol=1e-10)
    assert m.scores.shape == (30, 4) and m.basis.shape == (4, 16)


@pytest.mark.slow
def test_mfpca_independent_genders_separate():
    rng = np.random.default_rng(7)
    f = rng.standard_normal((500, 6)) * np.array([3, 1, 1, 1, 1, 1])
    m = rng.standard_normal((500, 6)) * np.array([1, 1, 2, 1, 1, 1])
    model = mfpca_stack(f, m, "fixed:2")
    for k in range(2):
        phi = model.eigenfunctions[k]
        cross = min(np.sum(phi[:6] ** 2), np.sum(phi[6:] ** 2)) / np.sum(phi**2)
        assert cross < 0.2


def test_mfpca_scores_vs_truncation(rng):
    f = np.cumsum(rng.standard_normal((25, 7)), axis=0)
    m = f * 0.5 + rng.standard_normal((25, 7))
    w = AgeGrid(range(7)).weights
    model = mfpca_stack(f, m, "fixed:3", weights=w)
    x = np.hstack([f, m])
    xc = x - x.mean(axis=0)
    ws = np.concatenate([w, w])
    phi = model.eigenfunctions[:3]
    truncated = (xc * ws) @ phi.T @ phi
    err_model = np.sum(((xc - (model.reconstruct() - x.mean(axis=0))) ** 2) @ ws)
    err_trunc = np.sum(((xc - truncated) ** 2) @ ws)
    assert err_model <= err_trunc + 1e-9


def test_mfpca_shape_mismatch(rng):
    with pytest.raises(DomainError):
        mfpca_stack(rng.standard_normal((10, 3)), rng.standard_normal((9, 3)))


def test_zero_residuals_give_k0():
    model = mfpca_stack(np.zeros((12, 5)), np.zeros((12, 5)))
    assert model.K == 0 and model.scores.shape == (12, 0)
    np.testing.assert_array_equal(model.reconstruct(np.zeros((3, 0))), np.zeros((3, 10)))
