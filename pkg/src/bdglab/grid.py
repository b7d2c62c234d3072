"""Periodic spatial and phase-space grids with one shared Fourier convention.

Convention: g_hat[k] = dx * sum_i g(x_i) exp(-2 pi i k x_i / L), stored in
numpy FFT order.  Momenta are p_k = hbar * 2 pi k / L.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class SpatialGrid:
    L: float
    n_x: int
    hbar: float

    def __post_init__(self):
        if self.L <= 0 or self.hbar <= 0:
            raise ValueError("L and hbar must be positive")
        if self.n_x < 4 or self.n_x % 4:
            raise ValueError(f"n_x must be a positive multiple of 4, got {self.n_x}")

    @property
    def dx(self) -> float:
        return self.L / self.n_x

    @property
    def h(self) -> float:
        return 2.0 * np.pi * self.hbar

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order, range -n/2 .. n/2-1."""
        return np.fft.fftfreq(self.n_x, 1.0 / self.n_x).astype(int)

    @cached_property
    def wavenumber(self) -> np.ndarray:
        return 2.0 * np.pi * self.k / self.L

    @cached_property
    def p(self) -> np.ndarray:
        return self.hbar * self.wavenumber

    @property
    def p_max(self) -> float:
        return float(np.abs(self.p).max())

    def displacement(self) -> np.ndarray:
        """Minimal-image signed displacement of each grid point from x=0."""
        return wrap(self.x, self.L)

    def with_points(self, n_x: int) -> "SpatialGrid":
        return SpatialGrid(self.L, n_x, self.hbar)


def wrap(d, L):
    """Map displacements into [-L/2, L/2)."""
    return (np.asarray(d) + 0.5 * L) % L - 0.5 * L


@dataclass(frozen=True)
class PhaseGrid:
    spatial: SpatialGrid
    n_xi: int
    xi_max: float

    def __post_init__(self):
        if self.n_xi < 2 or self.xi_max <= 0:
            raise ValueError("need n_xi >= 2 and xi_max > 0")

    @classmethod
    def wigner(cls, spatial: SpatialGrid) -> "PhaseGrid":
        """The phase grid produced by the even-displacement Wigner transform."""
        n = spatial.n_x
        return cls(spatial, n, np.pi * spatial.hbar * n / (2.0 * spatial.L))

    @classmethod
    def coarse(cls, like: "PhaseGrid", n_chi: int, n_xi: int) -> "PhaseGrid":
        """Same box as ``like`` with different point counts."""
        return cls(like.spatial.with_points(n_chi), n_xi, like.xi_max)

    @property
    def n_chi(self) -> int:
        return self.spatial.n_x

    @property
    def dchi(self) -> float:
        return self.spatial.dx

    @property
    def dxi(self) -> float:
        return 2.0 * self.xi_max / self.n_xi

    @property
    def cell(self) -> float:
        return self.dchi * self.dxi

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_chi, self.n_xi)

    @cached_property
    def chi(self) -> np.ndarray:
        return self.spatial.x

    @cached_property
    def xi(self) -> np.ndarray:
        return -self.xi_max + np.arange(self.n_xi) * self.dxi

    def same_box(self, other: "PhaseGrid", rtol: float = 1e-12) -> bool:
        return (abs(self.spatial.L - other.spatial.L) <= rtol * self.spatial.L
                and abs(self.xi_max - other.xi_max) <= rtol * self.xi_max)


def _check(samples, grid: SpatialGrid, axis: int):
    n = np.shape(samples)[axis]
    if n != grid.n_x:
        raise DimensionError(f"expected {grid.n_x} samples along axis {axis}, got {n}")


def fourier_forward(samples, grid: SpatialGrid, axis: int = -1) -> np.ndarray:
    _check(samples, grid, axis)
    return grid.dx * np.fft.fft(samples, axis=axis)


def fourier_inverse(coeffs, grid: SpatialGrid, axis: int = -1) -> np.ndarray:
    _check(coeffs, grid, axis)
    return np.fft.ifft(coeffs, axis=axis) / grid.dx


def spectral_derivative(samples, grid: SpatialGrid, order: int = 1) -> np.ndarray:
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    _check(samples, grid, -1)
    sym = (1j * grid.wavenumber) ** order
    if order % 2:
        sym = sym.copy()
        sym[grid.n_x // 2] = 0.0
    return np.fft.ifft(sym * np.fft.fft(samples))


def trig_interp(samples, L: float, points) -> np.ndarray:
    """Evaluate the trigonometric interpolant of real periodic samples at points.

    The Nyquist mode (even n) is split symmetrically into a cosine, so the
    interpolant is real and reproduces the samples exactly.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    c = np.fft.rfft(samples) / n
    k = np.arange(c.size)
    w = np.full(c.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    phase = np.exp(2j * np.pi * np.outer(np.asarray(points, dtype=float), k) / L)
    return (phase * (w * c)).real.sum(axis=1)
