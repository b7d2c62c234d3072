import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdglab.errors import SupportTooLarge
from bdglab.grid import PhaseGrid, SpatialGrid
from bdglab.kinetic import PhaseDensity
from bdglab.metrics import (DiscreteMeasure, MetricConfig, combined_error, quantum_moments,
                            schatten_norm, sobolev_negative_norm, w2_exact, w2_grid, w2_sinkhorn,
                            w2_sinkhorn_extrapolated)
from bdglab.transforms import CoherentFamily, antiwick_quantize

from conftest import gaussian_f, hbar_for


def test_exact_w2_of_translation():
    rng = np.random.default_rng(0)
    p = rng.random((20, 2))
    w = np.full(20, 1 / 20)
    mu = DiscreteMeasure(p, w)
    nu = DiscreteMeasure(p + [0.3, -0.1], w)
    assert w2_exact(mu, nu) == pytest.approx(0.1, abs=1e-9)


def test_exact_w2_single_atoms_periodic():
    mu = DiscreteMeasure([[0.05, 0.0]], [1.0])
    nu = DiscreteMeasure([[0.95, 0.0]], [1.0])
    assert w2_exact(mu, nu, period=(1.0, None)) == pytest.approx(0.01)


def test_exact_rejects_large_support():
    mu = DiscreteMeasure(np.zeros((400, 2)), np.full(400, 1 / 400))
    with pytest.raises(SupportTooLarge):
        w2_exact(mu, mu)


def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure([[0, 0], [1, 1]], [0.5, 0.6])
    with pytest.raises(ValueError):
        DiscreteMeasure([[0, 0]], [0.5, 0.5])


@settings(max_examples=8)
@given(st.integers(0, 10_000))
def test_sinkhorn_debiased_nonnegative_and_zero_on_diagonal(seed):
    rng = np.random.default_rng(seed)
    mu = DiscreteMeasure(rng.random((12, 2)), np.full(12, 1 / 12))
    assert abs(w2_sinkhorn(mu, mu, 0.05)) < 1e-9
    nu = DiscreteMeasure(rng.random((12, 2)), np.full(12, 1 / 12))
    assert w2_sinkhorn(mu, nu, 0.05) >= -1e-9


def test_sinkhorn_extrapolation_near_exact():
    rng = np.random.default_rng(3)

    def cloud(shift):
        p = rng.standard_normal((50, 2)) * 0.3 + shift
        w = rng.random(50)
        return DiscreteMeasure(p, w / w.sum())

    mu, nu = cloud(0.0), cloud(0.4)
    ex = w2_exact(mu, nu)
    val, eps, vals = w2_sinkhorn_extrapolated(mu, nu)
    assert abs(val - ex) / ex < 1e-3
    assert len(eps) == 3


def test_grid_w2_translation():
    pg = PhaseGrid(SpatialGrid(1.0, 32, hbar_for(8)), 32, 1.0)
    a = PhaseDensity(gaussian_f(pg, c=0.5, wc=0.08, wx=0.12), pg)
    b = PhaseDensity(gaussian_f(pg, c=0.6, wc=0.08, wx=0.12), pg)
    assert w2_grid(a, a) == pytest.approx(0.0, abs=1e-8)
    assert w2_grid(a, b) == pytest.approx(0.01, rel=0.05)


def test_grid_w2_requires_same_grid():
    pg = PhaseGrid(SpatialGrid(1.0, 16, hbar_for(4)), 16, 1.0)
    pg2 = PhaseGrid(SpatialGrid(1.0, 16, hbar_for(4)), 16, 2.0)
    with pytest.raises(ValueError):
        w2_grid(PhaseDensity(gaussian_f(pg), pg), PhaseDensity(gaussian_f(pg2), pg2))


def test_sobolev_norms_order():
    pg = PhaseGrid(SpatialGrid(1.0, 16, hbar_for(4)), 16, 1.0)
    v = np.random.default_rng(0).standard_normal(pg.shape)
    n0 = sobolev_negative_norm(v, 0, pg)
    assert n0 == pytest.approx(np.sqrt((v**2).sum() * pg.cell))
    assert sobolev_negative_norm(v, 6, pg) < sobolev_negative_norm(v, 1, pg) < n0
    with pytest.raises(ValueError):
        sobolev_negative_norm(v, -1, pg)
    with pytest.raises(ValueError):
        sobolev_negative_norm(v[0], 1, pg)


def test_moments_of_coherent_state(grid):
    op = CoherentFamily(grid).projector(0.5, 0.3)
    M2, M4, N2, N4 = quantum_moments(op)
    hb = grid.hbar
    assert M2 == pytest.approx(0.09 + hb / 2, rel=1e-5)
    assert N2 == pytest.approx(hb / 2, rel=1e-3)
    assert M4 > M2**2


def test_schatten_norms(grid):
    op = CoherentFamily(grid).projector(0.5, 0.0)
    # rank one with eigenvalue 1/h
    assert schatten_norm(op, 1) == pytest.approx(1.0)
    assert schatten_norm(op, 2) == pytest.approx(grid.h ** -0.5)
    assert schatten_norm(op, np.inf) == pytest.approx(1 / grid.h)
    with pytest.raises(ValueError):
        schatten_norm(op, 0.5)


def test_combined_error_small_for_matching_state():
    M = 8
    g = SpatialGrid(1.0, 4 * M, hbar_for(M))
    pg = PhaseGrid.wigner(g)
    f = PhaseDensity(gaussian_f(pg, wc=0.15, wx=0.2), pg)
    op = antiwick_quantize(f, g, 1.0)
    rep = combined_error(f, op, None, None, MetricConfig(two_particle=False))
    far = PhaseDensity(gaussian_f(pg, c=0.2, wc=0.15, wx=0.2), pg)
    rep2 = combined_error(far, op, None, None, MetricConfig(two_particle=False))
    assert 0 <= rep.total < rep2.total
    assert rep.to_dict()["total"] == rep.total
