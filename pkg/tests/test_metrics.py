import numpy as np
import pytest

from oracles import jsd_loop, kld_loop
from densityfts.errors import DomainError
from densityfts.metrics import jsd, kld
from densityfts.panel import AgeGrid, DensityCurve


def test_hand_pair():
    p, q = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    assert kld(p, q) == pytest.approx(0.2746530721670274, abs=1e-12)
    assert kld(p, q) == pytest.approx(kld_loop(p, q), abs=1e-15)
    assert jsd(p, q) == pytest.approx(jsd_loop(p, q), abs=1e-15)
    assert jsd(p, q) == pytest.approx(kld(p, q) / 4, abs=1e-15)


def test_identical_is_zero(rng):
    p = rng.dirichlet(np.ones(20))
    assert kld(p, p) == 0.0 and jsd(p, p) == 0.0


def test_symmetry_and_batch(rng):
    p = rng.dirichlet(np.ones(8), size=(3, 4))
    q = rng.dirichlet(np.ones(8), size=(3, 4))
    np.testing.assert_allclose(kld(p, q), kld(q, p), rtol=1e-14)
    np.testing.assert_allclose(jsd(p, q), jsd(q, p), rtol=1e-14)
    assert kld(p, q).shape == (3, 4)
    assert kld(p[1, 2], q[1, 2]) == pytest.approx(kld_loop(p[1, 2], q[1, 2]), rel=1e-12)


def test_density_curves_use_probability_scale():
    grid = AgeGrid([0.0, 1.0])
    p = DensityCurve(grid, [50000.0, 50000.0]).normalized()
    q = DensityCurve(grid, [25000.0, 75000.0]).normalized()
    expected = kld_loop([0.5, 0.5], [0.25, 0.75])
    assert kld(p, q) == pytest.approx(expected, rel=1e-12)


def test_zero_cell_rejected():
    with pytest.raises(DomainError, match="repair"):
        kld(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        jsd(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
