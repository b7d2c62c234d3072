"""Interaction kernel K, mean field, exchange, force and the Hartree-Fock Hamiltonian."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import SpatialGrid, fourier_forward, spectral_derivative, trig_interp, wrap

_IMAGES = 3


@dataclass(frozen=True)
class InteractionKernel:
    """Even periodic pair potential on a spatial grid.

    ``kind`` is ``gaussian`` (params a, sigma), ``cosine`` (params a, m) or
    ``tabulated`` (params samples, a circulant row K(x_i)).
    """

    kind: str
    params: dict
    grid: SpatialGrid
    samples: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "cosine", "tabulated"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "tabulated":
            s = np.asarray(self.params["samples"], dtype=float)
            if s.shape != (self.grid.n_x,):
                raise ValueError("tabulated samples must have length n_x")
        else:
            s = self.evaluate(self.grid.x)
        object.__setattr__(self, "samples", s)
        if np.abs(s - np.roll(s[::-1], 1)).max() > 1e-12 * max(1.0, np.abs(s).max()):
            raise ValueError("kernel is not even on the grid")

    @classmethod
    def from_spec(cls, spec: dict, grid: SpatialGrid) -> "InteractionKernel":
        spec = dict(spec)
        kind = spec.pop("kind")
        return cls(kind, spec, grid)

    @classmethod
    def zero(cls, grid: SpatialGrid) -> "InteractionKernel":
        return cls("cosine", {"a": 0.0, "m": 1}, grid)

    def spec(self) -> dict:
        if self.kind == "tabulated":
            return {"kind": "tabulated", "samples": [float(v) for v in self.samples]}
        return {"kind": self.kind, **{k: float(v) for k, v in self.params.items()}}

    def on(self, grid: SpatialGrid) -> "InteractionKernel":
        """The same potential sampled on another grid of the same length."""
        if self.kind != "tabulated":
            return InteractionKernel(self.kind, self.params, grid)
        s = trig_interp(self.samples, self.grid.L, grid.x)
        return InteractionKernel("tabulated", {"samples": s}, grid)

    # analytic evaluation -------------------------------------------------
    def evaluate(self, d, order: int = 0) -> np.ndarray:
        """K^(order)(d) for arbitrary displacements d."""
        d = np.asarray(d, dtype=float)
        L = self.grid.L
        if self.kind == "gaussian":
            a, s = float(self.params["a"]), float(self.params["sigma"])
            out = np.zeros_like(d)
            for m in range(-_IMAGES, _IMAGES + 1):
                y = wrap(d, L) + m * L
                g = a * np.exp(-0.5 * (y / s) ** 2)
                if order == 0:
                    out += g
                elif order == 1:
                    out += -y / s**2 * g
                else:
                    out += (y**2 / s**4 - 1.0 / s**2) * g
            return out
        if self.kind == "cosine":
            a, m = float(self.params["a"]), int(self.params["m"])
            q = 2.0 * np.pi * m / L
            ph = q * d
            return [a * np.cos(ph), -a * q * np.sin(ph), -a * q * q * np.cos(ph)][order]
        # tabulated: differentiate the trigonometric interpolant
        c = np.fft.rfft(self.samples) / self.grid.n_x
        kk = np.arange(c.size)
        w = np.full(c.size, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        q = 2j * np.pi * kk / L
        phase = np.exp(np.outer(d.ravel(), q))
        return (phase * (w * c * q**order)).real.sum(axis=1).reshape(d.shape)

    # derived tables -------------------------------------------------------
    @cached_property
    def matrix(self) -> np.ndarray:
        """K(x_i - x_j) as an n_x by n_x array."""
        n = self.grid.n_x
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        return self.samples[idx]

    @cached_property
    def fourier(self) -> np.ndarray:
        return fourier_forward(self.samples, self.grid).real

    @cached_property
    def derivative(self) -> np.ndarray:
        return self.evaluate(self.grid.x, order=1)

    def _sup(self, order: int) -> float:
        L = self.grid.L
        probe = np.linspace(-0.5 * L, 0.5 * L, 8193)
        if self.kind == "gaussian":
            s = float(self.params["sigma"])
            probe = np.concatenate([probe, [0.0, s, -s, np.sqrt(3) * s, -np.sqrt(3) * s]])
        return float(np.abs(self.evaluate(probe, order)).max())

    @cached_property
    def sup(self) -> float:
        return self._sup(0)

    @cached_property
    def sup_grad(self) -> float:
        return self._sup(1)

    @cached_property
    def sup_lap(self) -> float:
        return self._sup(2)

    @cached_property
    def l1_hat(self) -> float:
        """Torus l1 norm of the Fourier coefficients, (1/L) sum |K_hat_k|."""
        return float(np.abs(self.fourier).sum() / self.grid.L)

    @cached_property
    def sup_xK(self) -> float:
        """Diagnostic stand-in for sup |x K(x)| using wrapped x."""
        return float(np.abs(self.grid.displacement() * self.samples).max())

    def manifest(self) -> dict:
        return {**self.spec(), "sup": self.sup, "sup_grad": self.sup_grad,
                "sup_lap": self.sup_lap, "l1_hat": self.l1_hat, "sup_xK": self.sup_xK}


def _rho_of(op) -> np.ndarray:
    return op.rho if hasattr(op, "rho") else np.asarray(op)


def mean_field_potential(rho, K: InteractionKernel) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (K.grid.n_x,):
        raise ValueError("rho must have length n_x")
    v = np.fft.ifft(np.fft.fft(K.samples) * np.fft.fft(rho)) * K.grid.dx
    return v.real


def force_field(rho, K: InteractionKernel) -> np.ndarray:
    return -spectral_derivative(mean_field_potential(rho, K), K.grid, 1).real


def exchange_kernel(op, K: InteractionKernel) -> np.ndarray:
    kern = op.kernel if hasattr(op, "kernel") else np.asarray(op)
    return K.matrix * kern


def kinetic_matrix(grid: SpatialGrid) -> np.ndarray:
    """|p|^2/2 as an operator matrix in the orthonormal grid basis."""
    col = np.fft.ifft(0.5 * grid.p**2).real
    n = grid.n_x
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def hamiltonian_apply(op, vec, K: InteractionKernel, include_exchange: bool = True,
                      spinless: bool = False) -> np.ndarray:
    """Apply H_op = |p|^2/2 + V_op - h X_op to a sampled wave function."""
    g = K.grid
    vec = np.asarray(vec, dtype=complex)
    out = np.fft.ifft(0.5 * g.p**2 * np.fft.fft(vec))
    V = mean_field_potential(op.rho, K) * (2.0 if spinless else 1.0)
    out += V * vec
    if include_exchange:
        out -= g.h * g.dx * (exchange_kernel(op, K) @ vec)
    return out


def hamiltonian_matrix(op_matrix: np.ndarray, K: InteractionKernel, T: np.ndarray,
                       include_exchange: bool = True, spinless: bool = False) -> np.ndarray:
    """H_op in the orthonormal grid basis given op in the same basis (dx * kernel)."""
    g = K.grid
    rho = g.h * np.diag(op_matrix).real / g.dx
    V = mean_field_potential(rho, K) * (2.0 if spinless else 1.0)
    H = T.astype(complex)
    H[np.diag_indices_from(H)] += V
    if include_exchange:
        H -= g.h * K.matrix * op_matrix
    return H
