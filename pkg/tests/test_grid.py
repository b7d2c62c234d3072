import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdglab.errors import DimensionError
from bdglab.grid import (PhaseGrid, SpatialGrid, fourier_forward, fourier_inverse,
                         spectral_derivative, trig_interp, wrap)


@pytest.mark.parametrize("n", [0, 6, 30, -4])
def test_rejects_bad_point_counts(n):
    with pytest.raises(ValueError):
        SpatialGrid(1.0, n, 0.01)


def test_momenta_follow_hbar(grid):
    assert np.isclose(grid.h, 2 * np.pi * grid.hbar)
    assert np.allclose(grid.p, grid.hbar * 2 * np.pi * grid.k / grid.L)
    assert grid.k[0] == 0 and grid.k[grid.n_x // 2] == -grid.n_x // 2


def test_wigner_grid_spacing(grid):
    pg = PhaseGrid.wigner(grid)
    assert pg.shape == (grid.n_x, grid.n_x)
    assert np.isclose(pg.dxi, np.pi * grid.hbar / grid.L)
    assert np.isclose(pg.xi[0], -pg.xi_max)


def test_fourier_of_constant(grid):
    c = fourier_forward(np.ones(grid.n_x), grid)
    assert np.isclose(c[0], grid.L)
    assert np.allclose(c[1:], 0)


@given(st.lists(st.floats(-5, 5), min_size=16, max_size=16))
def test_fourier_roundtrip(vals):
    g = SpatialGrid(2.0, 16, 0.05)
    v = np.array(vals)
    assert np.allclose(fourier_inverse(fourier_forward(v, g), g).real, v, atol=1e-12)


def test_fourier_checks_length(grid):
    with pytest.raises(DimensionError):
        fourier_forward(np.ones(grid.n_x + 4), grid)


def test_spectral_derivative_of_sine(grid):
    x = grid.x
    s = np.sin(2 * np.pi * 3 * x / grid.L)
    d = spectral_derivative(s, grid).real
    assert np.allclose(d, 2 * np.pi * 3 / grid.L * np.cos(2 * np.pi * 3 * x / grid.L), atol=1e-10)
    d2 = spectral_derivative(s, grid, 2).real
    assert np.allclose(d2, -(2 * np.pi * 3 / grid.L) ** 2 * s, atol=1e-8)


@given(st.lists(st.floats(-3, 3), min_size=12, max_size=12))
def test_trig_interp_reproduces_nodes(vals):
    L = 1.5
    v = np.array(vals)
    x = np.arange(12) * L / 12
    assert np.allclose(trig_interp(v, L, x), v, atol=1e-10)


def test_trig_interp_exact_for_bandlimited():
    L, n = 1.0, 16
    x = np.arange(n) / n
    f = lambda y: np.cos(2 * np.pi * 3 * y) + 0.5 * np.sin(2 * np.pi * 5 * y)
    y = np.linspace(0, 1, 37)
    assert np.allclose(trig_interp(f(x), L, y), f(y), atol=1e-12)


def test_wrap_range():
    d = wrap(np.linspace(-3, 3, 101), 1.0)
    assert d.min() >= -0.5 and d.max() < 0.5
