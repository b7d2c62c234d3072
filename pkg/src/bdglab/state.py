"""Rescaled quantum state (op, alpha) on a periodic grid.

Kernels are the stored representation.  Composition of kernels carries the
quadrature weight dx, so the operator matrix in the orthonormal grid basis
is ``dx * kernel``; traces are ``dx * sum(diag)``.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError, UndefinedMarginalError
from .grid import SpatialGrid

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"


@dataclass(frozen=True)
class DensityOperator:
    kernel: np.ndarray
    grid: SpatialGrid
    N: float

    def __post_init__(self):
        n = self.grid.n_x
        if np.shape(self.kernel) != (n, n):
            raise ValueError(f"kernel must be {n}x{n}")

    @classmethod
    def from_matrix(cls, matrix, grid, N):
        return cls(np.asarray(matrix) / grid.dx, grid, N)

    @property
    def matrix(self) -> np.ndarray:
        return self.grid.dx * self.kernel

    @property
    def rho(self) -> np.ndarray:
        """Spatial density h * op(x, x)."""
        return self.grid.h * np.diag(self.kernel).real

    @property
    def trace(self) -> float:
        """h * Tr op, equal to one for admissible states."""
        return float(self.grid.h * self.grid.dx * np.trace(self.kernel).real)

    def spectrum(self) -> np.ndarray:
        m = self.matrix
        return np.linalg.eigvalsh(0.5 * (m + m.conj().T))

    def violations(self) -> dict:
        k = self.kernel
        scale = max(1.0, float(np.abs(k).max()))
        lam = self.spectrum()
        top = 1.0 / (self.N * self.grid.h)
        return {
            "hermitian": float(np.abs(k - k.conj().T).max()) / scale,
            "trace": abs(self.trace - 1.0),
            "spectrum_low": max(0.0, -float(lam[0])) / top,
            "spectrum_high": max(0.0, float(lam[-1]) - top) / top,
        }

    def check(self, tol_herm=1e-10, tol_trace=1e-8, tol_spec=1e-8):
        v = self.violations()
        lim = {"hermitian": tol_herm, "trace": tol_trace,
               "spectrum_low": tol_spec, "spectrum_high": tol_spec}
        bad = {k: v[k] for k in v if v[k] > lim[k]}
        if bad:
            raise InvariantError(f"density operator invariants violated: {bad}")
        return self


@dataclass(frozen=True)
class PairingState:
    kernel: np.ndarray
    symmetry: str
    grid: SpatialGrid
    N: float

    def __post_init__(self):
        if self.symmetry not in (SYMMETRIC, ANTISYMMETRIC):
            raise ValueError(f"bad symmetry flag {self.symmetry!r}")
        n = self.grid.n_x
        if np.shape(self.kernel) != (n, n):
            raise ValueError(f"kernel must be {n}x{n}")

    @classmethod
    def zero(cls, grid, N, symmetry=SYMMETRIC):
        return cls(np.zeros((grid.n_x, grid.n_x), complex), symmetry, grid, N)

    @property
    def sign(self) -> int:
        return 1 if self.symmetry == SYMMETRIC else -1

    @property
    def matrix(self) -> np.ndarray:
        return self.grid.dx * self.kernel

    @property
    def theta(self) -> float:
        return theta(self)

    def psi(self) -> np.ndarray:
        """Normalized pairing wave function on the grid, as a kernel."""
        nrm = np.sqrt((np.abs(self.kernel) ** 2).sum()) * self.grid.dx
        if nrm == 0:
            raise UndefinedMarginalError("pairing is zero")
        return self.kernel / nrm

    def check(self, tol=1e-10):
        k = self.kernel
        scale = max(1.0, float(np.abs(k).max()))
        asym = float(np.abs(k - self.sign * k.T).max()) / scale
        th = self.theta
        if asym > tol or not (0.0 <= th < 1.0):
            raise InvariantError(f"pairing invariants violated: symmetry {asym:.2e}, theta {th}")
        return self


@dataclass(frozen=True)
class QuantumState:
    op: DensityOperator
    pairing: PairingState
    time: float = 0.0

    def __post_init__(self):
        if self.op.grid != self.pairing.grid or self.op.N != self.pairing.N:
            raise ValueError("op and pairing must share grid and N")

    @property
    def grid(self) -> SpatialGrid:
        return self.op.grid

    @property
    def N(self) -> float:
        return self.op.N


def theta(pairing: PairingState, grid: SpatialGrid | None = None, N: float | None = None) -> float:
    grid = grid or pairing.grid
    N = pairing.N if N is None else N
    return float(grid.dx**2 * (np.abs(pairing.kernel) ** 2).sum() / N)


def pairing_marginal(pairing: PairingState, grid: SpatialGrid | None = None,
                     N: float | None = None) -> np.ndarray:
    """Kernel of the first marginal op_{alpha:1} = |alpha*|^2 / (N h theta)."""
    grid = grid or pairing.grid
    N = pairing.N if N is None else N
    th = theta(pairing, grid, N)
    if th <= 0:
        raise UndefinedMarginalError("theta = 0: pairing marginal undefined")
    a = pairing.kernel
    return grid.dx * (a @ a.conj().T) / (N * grid.h * th)


def quasifree_residual(op: DensityOperator, pairing: PairingState) -> float:
    """Operator norm of N h op^2 + theta op_{alpha:1} - op."""
    g = op.grid
    O = op.matrix
    A = pairing.matrix
    R = op.N * g.h * (O @ O) + (A @ A.conj().T) / (op.N * g.h) - O
    R = 0.5 * (R + R.conj().T)
    return float(np.abs(np.linalg.eigvalsh(R)).max())


@dataclass
class InitInfo:
    theta_target: float
    theta_achieved: float
    theta_max: float
    attained: bool
    residual: float
    clipped_mass: float
    warnings: list = field(default_factory=list)


def quasifree_init(f_target, theta_target: float, grid: SpatialGrid, N: float,
                   symmetry: str = SYMMETRIC, return_info: bool = False):
    """Pure quasi-free data whose density is the anti-Wick quantization of f_target.

    With N h op = sum_k lam_k |u_k><u_k| (real eigenvectors) the pairing
    kernel is s * sum_k sqrt(lam_k (1 - lam_k)) u_k(x) u_k(y), with s <= 1
    scaling theta down to the requested value.  Only s = 1 gives an exactly
    pure state; smaller theta leaves residual (1 - s^2) * sum lam(1-lam).
    """
    from .transforms import antiwick_quantize

    if not 0.0 <= theta_target < 1.0:
        raise ValueError("theta_target must lie in [0, 1)")
    v = f_target.values
    if np.abs(v[:, 1:] - v[:, :0:-1]).max() > 1e-10 * np.abs(v).max():
        raise ValueError("f_target must be even in xi for a real eigenbasis")
    op, clipped = antiwick_quantize(f_target, grid, N, return_clipped=True)
    # the -xi_max row has no mirror node; the real part quantizes its symmetrization
    kern = op.kernel.real
    op = DensityOperator(kern.astype(complex), grid, N)

    G = N * grid.h * grid.dx * kern
    lam, V = np.linalg.eigh(0.5 * (G + G.T))
    lam = np.clip(lam, 0.0, 1.0)
    notes = []
    if symmetry == SYMMETRIC:
        c = np.sqrt(lam * (1.0 - lam))
        B = (V * c) @ V.T
    else:
        order = np.argsort(lam)[::-1]
        B = np.zeros_like(G)
        for i in range(0, len(order) - 1, 2):
            a, b = V[:, order[i]], V[:, order[i + 1]]
            lb = 0.5 * (lam[order[i]] + lam[order[i + 1]])
            B += np.sqrt(lb * (1.0 - lb)) * (np.outer(a, b) - np.outer(b, a))
        if len(order) % 2:
            notes.append("odd dimension: one mode left unpaired")
    # B is the pairing in the orthonormal basis at s = 1
    theta_max = float((B**2).sum() / N)
    if theta_target > 0 and theta_max > 0:
        s = np.sqrt(min(theta_target, theta_max) / theta_max)
    else:
        s = 0.0
    A = s * B / grid.dx
    pairing = PairingState(A.astype(complex), symmetry, grid, N)
    achieved = theta(pairing)
    attained = achieved >= theta_target - 1e-12
    if not attained:
        notes.append(f"theta_target {theta_target:.4g} unattainable; achieved {achieved:.4g}")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    state = QuantumState(op, pairing, 0.0)
    res = quasifree_residual(op, pairing)
    if return_info:
        return state, InitInfo(theta_target, achieved, theta_max, attained, res, clipped, notes)
    return state


# snapshots ----------------------------------------------------------------
_MAGIC = b"BDGS"
_VERSION = 1
_HEADER = struct.Struct("<4sIIddddB")


def save_snapshot(path, state: QuantumState) -> None:
    g = state.grid
    flag = 1 if state.pairing.symmetry == SYMMETRIC else 0
    head = _HEADER.pack(_MAGIC, _VERSION, g.n_x, g.L, g.hbar, float(state.N),
                        state.pairing.theta, flag)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(state.op.kernel, dtype="<c8").tobytes())
        fh.write(np.ascontiguousarray(state.pairing.kernel, dtype="<c8").tobytes())


def load_snapshot(path, time: float = 0.0) -> QuantumState:
    """Read a snapshot; the format carries no time stamp, so pass it in."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, ver, n, L, hbar, N, _theta, flag = _HEADER.unpack_from(raw)
    if magic != _MAGIC or ver != _VERSION:
        raise ValueError(f"not a BDGS v{_VERSION} snapshot: {path}")
    g = SpatialGrid(L, n, hbar)
    body = np.frombuffer(raw, dtype="<c8", offset=_HEADER.size)
    if body.size != 2 * n * n:
        raise ValueError("truncated snapshot")
    op = DensityOperator(body[: n * n].reshape(n, n).astype(complex), g, N)
    sym = SYMMETRIC if flag else ANTISYMMETRIC
    al = PairingState(body[n * n:].reshape(n, n).astype(complex), sym, g, N)
    return QuantumState(op, al, time)
