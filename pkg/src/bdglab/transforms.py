"""Wigner, Husimi and anti-Wick maps between kernels and phase-space densities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleQuantization, TransformInconsistency, UndefinedMarginalError
from .grid import PhaseGrid, SpatialGrid
from .kinetic import PhaseDensity, TwoParticleDensity
from .state import DensityOperator, PairingState

_IMAGES = 3


@dataclass(frozen=True)
class CoherentFamily:
    """Periodized Gaussian wave packets g_z sampled on ``grid``."""

    grid: SpatialGrid

    def states(self, chi, xi, normalize: bool = True) -> np.ndarray:
        """Rows g_z(x_i) for the phase points (chi[k], xi[k])."""
        g = self.grid
        chi = np.atleast_1d(np.asarray(chi, dtype=float))[:, None]
        xi = np.atleast_1d(np.asarray(xi, dtype=float))[:, None]
        x = g.x[None, :]
        out = np.zeros((chi.shape[0], g.n_x), dtype=complex)
        pref = (np.pi * g.hbar) ** -0.25
        # images beyond the nearest ones contribute below exp(-40)
        reach = min(_IMAGES, 1 + int(np.ceil(np.sqrt(80 * g.hbar) / g.L)))
        for m in range(-reach, reach + 1):
            y = x + m * g.L
            out += np.exp(-((y - chi) ** 2) / (2 * g.hbar) + 1j * xi * y / g.hbar)
        out *= pref
        if normalize:
            out /= np.sqrt((np.abs(out) ** 2).sum(axis=1, keepdims=True) * g.dx)
        return out

    def on_phase_grid(self, pg: PhaseGrid) -> np.ndarray:
        """Coherent states for every node of ``pg``, rows in (chi, xi) C order."""
        C, X = np.meshgrid(pg.chi, pg.xi, indexing="ij")
        return self.states(C.ravel(), X.ravel())

    def projector(self, chi: float, xi: float, N: float = 1.0) -> DensityOperator:
        """|g_z><g_z| scaled to unit h-trace."""
        gz = self.states(chi, xi)[0]
        return DensityOperator(np.outer(gz, gz.conj()) / self.grid.h, self.grid, N)


def wigner(op) -> np.ndarray:
    """Discrete Wigner function on PhaseGrid.wigner(op.grid), shape (n_x, n_x).

    Displacements y = 2 m dx with |m| <= n/4; the two end terms get weight
    1/2.  The xi grid has spacing pi hbar / L.
    """
    g = op.grid
    k = op.kernel
    n = g.n_x
    q = n // 4
    i = np.arange(n)[:, None]
    m = np.arange(-q, q + 1)[None, :]
    T = k[(i + m) % n, (i - m) % n]
    T[:, 0] *= 0.5
    T[:, -1] *= 0.5
    full = np.zeros((n, n), dtype=complex)
    full[:, m[0] % n] = T
    full *= (-1.0) ** np.arange(n)[None, :]
    W = 2 * g.dx * np.fft.fft(full, axis=1)
    return W.real


def wigner_grid(grid: SpatialGrid) -> PhaseGrid:
    return PhaseGrid.wigner(grid)


def gaussian_smooth(values: np.ndarray, pg: PhaseGrid, var: float) -> np.ndarray:
    """Periodic convolution with an isotropic Gaussian of variance ``var`` per axis."""
    kc = 2 * np.pi * np.fft.fftfreq(pg.n_chi, pg.dchi)
    kx = 2 * np.pi * np.fft.fftfreq(pg.n_xi, pg.dxi)
    mult = np.exp(-0.5 * var * (kc[:, None] ** 2 + kx[None, :] ** 2))
    return np.fft.ifft2(np.fft.fft2(values) * mult).real


def husimi(op, method: str = "convolution", neg_tol: float = 1e-4, return_info: bool = False):
    """Husimi density on the Wigner phase grid, renormalized to unit mass.

    ``convolution`` smooths the discrete Wigner function with g_h by FFT;
    negatives smaller than ``neg_tol`` times the peak are clipped (they come
    from truncating the displacement window on the torus).  ``direct``
    evaluates <g_z, op g_z> at every node and is nonnegative by construction.
    """
    pg = wigner_grid(op.grid)
    if method == "convolution":
        v = gaussian_smooth(wigner(op), pg, 0.5 * op.grid.hbar)
    elif method == "direct":
        G = CoherentFamily(op.grid).on_phase_grid(pg)
        v = (np.einsum("za,za->z", G.conj() @ op.kernel, G).real * op.grid.dx**2)
        v = v.reshape(pg.shape)
    else:
        raise ValueError(f"unknown Husimi method {method!r}")
    scale = np.abs(v).max()
    low = float(v.min())
    if low < -neg_tol * scale:
        raise TransformInconsistency(f"Husimi negativity {low:.3e} (scale {scale:.3e})")
    v = np.where(v < 0, 0.0, v)
    mass = v.sum() * pg.cell
    out = PhaseDensity(v / mass, pg)
    if return_info:
        return out, {"mass_before": float(mass), "min_before": low}
    return out


def husimi_at(op, chi, xi) -> np.ndarray:
    """Direct coherent-state expectation <g_z, op g_z> at arbitrary points."""
    G = CoherentFamily(op.grid).states(chi, xi)
    return (np.einsum("za,ab,zb->z", G.conj(), op.kernel, G) * op.grid.dx**2).real


def husimi_crosscheck(op, n_points: int = 5, rng=None) -> float:
    """Largest gap between the convolution Husimi and direct evaluation at grid nodes."""
    rng = np.random.default_rng(rng)
    pg = wigner_grid(op.grid)
    conv = gaussian_smooth(wigner(op), pg, 0.5 * op.grid.hbar)
    w = (conv.clip(0) / conv.clip(0).sum()).ravel()
    idx = rng.choice(w.size, size=n_points, p=w)
    i, j = np.unravel_index(idx, conv.shape)
    direct = husimi_at(op, pg.chi[i], pg.xi[j])
    return float(np.abs(direct - conv[i, j]).max())


def husimi_two_particle(pairing: PairingState, pg: PhaseGrid) -> TwoParticleDensity:
    """F(z1, z2) proportional to |<g_z1 (x) g_z2, Psi_alpha>|^2 on the grid ``pg``."""
    if pairing.theta <= 0:
        raise UndefinedMarginalError("theta = 0: two-particle Husimi undefined")
    g = pairing.grid
    G = CoherentFamily(g).on_phase_grid(pg)
    return TwoParticleDensity(_husimi2_values(pairing, G, G, pg), pg)


def husimi_two_particle_at(pairing: PairingState, z1, z2) -> np.ndarray:
    """Unnormalized |<g_z1 (x) g_z2, Psi>|^2 / h^2 for all pairs of point sets."""
    fam = CoherentFamily(pairing.grid)
    G1 = fam.states(*z1)
    G2 = fam.states(*z2)
    return _husimi2_values(pairing, G1, G2, None)


def _husimi2_values(pairing, G1, G2, pg):
    g = pairing.grid
    psi = pairing.psi()
    C = g.dx**2 * (G1.conj() @ psi @ G2.conj().T)
    F = (np.abs(C) ** 2) / g.h**2
    if pg is None:
        return F
    n = pg.shape
    F = F.reshape(n + n)
    return F / (F.sum() * pg.cell**2)


def antiwick_quantize(f: PhaseDensity, grid: SpatialGrid, N: float, max_clip: float = 0.01,
                      cutoff: float = 1e-14, return_clipped: bool = False):
    """Toeplitz quantization (1/h) sum_z f(z) |g_z><g_z| dchi dxi.

    The result is rescaled to unit h-trace and its spectrum capped at
    1/(N h); capped mass is returned to the uncapped modes in proportion.
    """
    pg = f.grid
    vals = f.values.ravel()
    keep = vals > cutoff * vals.max()
    C, X = np.meshgrid(pg.chi, pg.xi, indexing="ij")
    G = CoherentFamily(grid).states(C.ravel()[keep], X.ravel()[keep])
    w = vals[keep] * pg.cell / grid.h
    kern = (G.T * w) @ G.conj()
    kern = 0.5 * (kern + kern.conj().T)
    M = grid.dx * kern
    lam, V = np.linalg.eigh(M)
    lam = np.clip(lam, 0.0, None)
    lam *= 1.0 / (grid.h * lam.sum())
    lam, moved = _cap_spectrum(lam, 1.0 / (N * grid.h), grid.h)
    if moved > max_clip:
        raise InfeasibleQuantization(
            f"capping the spectrum at 1/(N h) moves {moved:.2%} of the mass; "
            "f is too peaked for this N and hbar")
    M = (V * lam) @ V.conj().T
    op = DensityOperator(M / grid.dx, grid, N)
    return (op, moved) if return_clipped else op


def _cap_spectrum(lam, cap, h):
    """Water-fill: cap eigenvalues and rescale the rest to keep h * sum = 1."""
    lam = lam.copy()
    moved = h * np.clip(lam - cap, 0, None).sum()
    for _ in range(100):
        over = lam >= cap
        if not (lam > cap * (1 + 1e-14)).any():
            break
        lam[over] = cap
        rest = lam[~over].sum()
        need = 1.0 / h - cap * over.sum()
        if rest <= 0 or need < 0:
            raise InfeasibleQuantization("spectrum cap below the trace constraint")
        lam[~over] *= need / rest
    return lam, float(moved)


def skew_information(op) -> float:
    """|| grad f_{sqrt(op)} ||_{L^2} on the Wigner phase grid."""
    g = op.grid
    M = g.dx * op.kernel
    lam, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    root = (V * np.sqrt(np.clip(lam, 0, None))) @ V.conj().T / g.dx
    W = wigner(DensityOperator(root, g, op.N))
    pg = wigner_grid(g)
    kc = 2 * np.pi * np.fft.fftfreq(pg.n_chi, pg.dchi)
    kx = 2 * np.pi * np.fft.fftfreq(pg.n_xi, pg.dxi)
    What = np.fft.fft2(W)
    energy = (np.abs(What) ** 2 * (kc[:, None] ** 2 + kx[None, :] ** 2)).sum()
    # Parseval on the phase torus: sum |grad W|^2 cell = cell / n * sum |k W_hat|^2
    return float(np.sqrt(energy * pg.cell / W.size))
