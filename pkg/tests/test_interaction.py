import numpy as np
import pytest

from bdglab.grid import SpatialGrid
from bdglab.interaction import (InteractionKernel, exchange_kernel, force_field,
                                hamiltonian_apply, hamiltonian_matrix, kinetic_matrix,
                                mean_field_potential)
from bdglab.state import DensityOperator


def test_gaussian_matches_closed_form(grid, kernel):
    d = grid.displacement()
    images = sum(np.exp(-0.5 * ((d + m) / 0.1) ** 2) for m in range(-4, 5))
    assert np.allclose(kernel.samples, images, atol=1e-12)
    assert np.isclose(kernel.sup, 1.0)


def test_derivatives_by_finite_differences(kernel):
    x = np.linspace(-0.3, 0.3, 7)
    e = 1e-5
    fd1 = (kernel.evaluate(x + e) - kernel.evaluate(x - e)) / (2 * e)
    fd2 = (kernel.evaluate(x + e) - 2 * kernel.evaluate(x) + kernel.evaluate(x - e)) / e**2
    assert np.allclose(kernel.evaluate(x, 1), fd1, atol=1e-6)
    assert np.allclose(kernel.evaluate(x, 2), fd2, atol=1e-3)


def test_cosine_kernel_fourier(grid):
    K = InteractionKernel.from_spec({"kind": "cosine", "a": 2.0, "m": 3}, grid)
    c = K.fourier
    assert np.isclose(c[3], 1.0) and np.isclose(c[-3], 1.0)
    assert np.isclose(K.l1_hat, 2.0)


def test_tabulated_roundtrip(grid, kernel):
    T = InteractionKernel.from_spec({"kind": "tabulated", "samples": kernel.samples}, grid)
    assert np.allclose(T.matrix, kernel.matrix)
    assert np.allclose(T.on(grid.with_points(64)).samples,
                       kernel.on(grid.with_points(64)).samples, atol=1e-3)


def test_rejects_odd_kernel(grid):
    s = np.sin(2 * np.pi * grid.x)
    with pytest.raises(ValueError):
        InteractionKernel.from_spec({"kind": "tabulated", "samples": s}, grid)
    with pytest.raises(ValueError):
        InteractionKernel.from_spec({"kind": "yukawa", "a": 1.0}, grid)


def test_uniform_density_has_flat_potential(grid, kernel):
    rho = np.full(grid.n_x, 1.0 / grid.L)
    V = mean_field_potential(rho, kernel)
    assert np.allclose(V, V[0])
    assert np.isclose(V[0], kernel.samples.sum() * grid.dx / grid.L)
    assert np.allclose(force_field(rho, kernel), 0, atol=1e-12)


def test_force_is_minus_gradient(grid):
    K = InteractionKernel.from_spec({"kind": "cosine", "a": 1.0, "m": 1}, grid)
    rho = 1.0 + 0.5 * np.cos(2 * np.pi * grid.x)
    # K * rho = 0.25 cos(2 pi x), force = 0.5 pi sin(2 pi x)
    assert np.allclose(force_field(rho, K), 0.5 * np.pi * np.sin(2 * np.pi * grid.x), atol=1e-12)


def test_hamiltonian_apply_matches_matrix(grid, kernel):
    rng = np.random.default_rng(1)
    B = rng.standard_normal((grid.n_x, 4)) + 1j * rng.standard_normal((grid.n_x, 4))
    M = B @ B.conj().T
    M /= grid.h * np.trace(M).real
    op = DensityOperator.from_matrix(M, grid, 1.0)
    H = hamiltonian_matrix(op.matrix, kernel, kinetic_matrix(grid))
    v = rng.standard_normal(grid.n_x) + 0j
    assert np.allclose(H @ v, hamiltonian_apply(op, v, kernel), atol=1e-10)
    assert np.allclose(H, H.conj().T)
    assert exchange_kernel(op, kernel).shape == (grid.n_x, grid.n_x)


def test_kinetic_matrix_spectrum(grid):
    T = kinetic_matrix(grid)
    assert np.allclose(np.sort(np.linalg.eigvalsh(T)), np.sort(0.5 * grid.p**2))


def test_manifest_keys():
    g = SpatialGrid(1.0, 16, 0.02)
    K = InteractionKernel.from_spec({"kind": "gaussian", "a": 0.5, "sigma": 0.2}, g)
    m = K.manifest()
    assert m["kind"] == "gaussian" and m["l1_hat"] > 0 and m["sup_grad"] > 0
