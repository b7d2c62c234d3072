"""Semi-Lagrangian transport for the Vlasov equation and the two-particle system.

Every sub-step of the splitting is a constant-velocity shift along one axis,
so it is applied in Fourier space along that axis: either an exact phase
shift (``spectral``) or the periodic cubic B-spline interpolant, whose
shift symbol is b_s(k) / b_0(k) (``spline``).  Both conserve mass exactly.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainTooSmallError
from .grid import PhaseGrid, SpatialGrid, trig_interp
from .interaction import InteractionKernel, force_field

GUARD_CELLS = 2
TOL_BOUNDARY = 1e-10


@dataclass(frozen=True)
class PhaseDensity:
    values: np.ndarray
    grid: PhaseGrid

    def __post_init__(self):
        if np.shape(self.values) != self.grid.shape:
            raise ValueError(f"values must have shape {self.grid.shape}")

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell)

    @property
    def rho(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.grid.dxi

    def l2(self) -> float:
        return float(np.sqrt((self.values**2).sum() * self.grid.cell))

    def moment_xi(self, n: int = 2) -> float:
        return float((self.values * np.abs(self.grid.xi) ** n).sum() * self.grid.cell)

    def normalized(self) -> "PhaseDensity":
        return PhaseDensity(self.values / self.mass, self.grid)


@dataclass(frozen=True)
class TwoParticleDensity:
    """F indexed (chi1, xi1, chi2, xi2)."""

    values: np.ndarray
    grid: PhaseGrid

    def __post_init__(self):
        if np.shape(self.values) != self.grid.shape * 2:
            raise ValueError(f"values must have shape {self.grid.shape * 2}")

    @classmethod
    def product(cls, f1: PhaseDensity, f2: PhaseDensity | None = None):
        f2 = f1 if f2 is None else f2
        return cls(np.multiply.outer(f1.values, f2.values), f1.grid)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell**2)

    def marginal(self, which: int = 1) -> PhaseDensity:
        axes = (2, 3) if which == 1 else (0, 1)
        return PhaseDensity(self.values.sum(axis=axes) * self.grid.cell, self.grid)

    def exchange_residual(self) -> float:
        v = self.values
        return float(np.abs(v - v.transpose(2, 3, 0, 1)).max() / max(np.abs(v).max(), 1e-300))

    def product_residual(self) -> float:
        """sup |F - F_1 (x) F_2| relative to sup F."""
        p = np.multiply.outer(self.marginal(1).values, self.marginal(2).values)
        return float(np.abs(self.values - p).max() / np.abs(self.values).max())


# one-dimensional shifts ----------------------------------------------------
def _bspline3(t):
    t = np.abs(t)
    return np.where(t < 1, 2.0 / 3.0 - t**2 + 0.5 * t**3,
                    np.where(t < 2, (2.0 - t) ** 3 / 6.0, 0.0))


def shift_symbol(n: int, s, method: str = "spectral") -> np.ndarray:
    """rfft-domain symbol of b(i) = a(i - s); s broadcasts, k is the last axis."""
    k = np.arange(n // 2 + 1)
    s = np.asarray(s, dtype=float)[..., None]
    if method == "spectral":
        return np.exp(-2j * np.pi * k * s / n)
    if method == "spline":
        base = np.floor(s)
        num = 0.0
        for j in range(-1, 3):
            m = base + j
            num = num + _bspline3(m - s) * np.exp(-2j * np.pi * k * m / n)
        return num / ((4.0 + 2.0 * np.cos(2 * np.pi * k / n)) / 6.0)
    raise ValueError(f"unknown interpolation method {method!r}")


def shift_axis(a: np.ndarray, axis: int, s, method: str = "spectral") -> np.ndarray:
    """Periodic shift of real data by s cells along ``axis``.

    ``s`` is a scalar or an array broadcastable against ``a`` with size one
    along ``axis``; each line moves by its own amount.
    """
    n = a.shape[axis]
    axis = axis % a.ndim
    s = np.asarray(s, dtype=float)
    if s.ndim:
        s = np.moveaxis(s, axis, -1)[..., 0]
    else:
        s = s.reshape((1,) * (a.ndim - 1))
    sym = np.moveaxis(shift_symbol(n, s, method), -1, axis)
    return np.fft.irfft(np.fft.rfft(a, axis=axis) * sym, n, axis=axis)


# guards and cleanup --------------------------------------------------------
def boundary_mass(values: np.ndarray, grid: PhaseGrid, xi_axes: Sequence[int]) -> float:
    g = GUARD_CELLS
    idx = np.r_[0:g, grid.n_xi - g:grid.n_xi]
    cell = grid.cell ** (values.ndim // 2)
    total = 0.0
    mask = np.zeros(values.shape, dtype=bool)
    for ax in xi_axes:
        sl = [slice(None)] * values.ndim
        sl[ax] = idx
        mask[tuple(sl)] = True
    total = float(np.abs(values[mask]).sum() * cell)
    return total


def _guard(values, grid, xi_axes, tol):
    if tol is None:
        return
    bm = boundary_mass(values, grid, xi_axes)
    if bm > tol:
        raise DomainTooSmallError(f"mass {bm:.3e} within {GUARD_CELLS} cells of the xi boundary")


def _clean(values: np.ndarray, mass0: float, cell: float):
    neg = values < 0
    clipped = float(-values[neg].sum() * cell)
    if clipped:
        values = np.where(neg, 0.0, values)
    m = values.sum() * cell
    return values * (mass0 / m), clipped


# one-particle Vlasov ------------------------------------------------------
def vlasov_step(f: PhaseDensity, K: InteractionKernel, dt: float, method: str = "spectral",
                mf_factor: float = 1.0, source: Callable | None = None,
                tol_boundary: float | None = TOL_BOUNDARY, return_field: bool = False):
    """One Strang step: half chi-shift, full xi-shift in E_f(t + dt/2), half chi-shift.

    ``source`` is an optional callable (f_values, t_half_field) -> d f/dt added
    with an explicit midpoint increment; it is off unless supplied.
    """
    g = f.grid
    if abs(dt) * g.xi_max > g.n_chi * g.dchi:
        raise ValueError("displacement per step exceeds one period")
    sx = (g.xi * (0.5 * dt) / g.dchi)[None, :]
    a = shift_axis(f.values, 0, sx, method)
    E = mf_factor * force_field(a.sum(axis=1) * g.dxi, K)
    a = shift_axis(a, 1, (E * dt / g.dxi)[:, None], method)
    if source is not None:
        a = a + dt * source(a, E)
    a = shift_axis(a, 0, sx, method)
    a, clipped = _clean(a, 1.0, g.cell)
    _guard(a, g, (1,), tol_boundary)
    out = PhaseDensity(a, g)
    if return_field:
        return out, E, clipped
    return out


# two-particle transport ---------------------------------------------------
def pair_force(K: InteractionKernel, grid: PhaseGrid) -> np.ndarray:
    """grad K(chi1 - chi2) on the grid's chi points."""
    chi = grid.chi
    return K.evaluate(chi[:, None] - chi[None, :], order=1)


def twoparticle_step(F: TwoParticleDensity, f_field, K: InteractionKernel, dt: float,
                     eta: int = 0, N: float = 1.0, method: str = "spectral",
                     tol_boundary: float | None = TOL_BOUNDARY, return_clipped: bool = False):
    """Split step of the two-particle transport in the one-particle field ``f_field``.

    ``f_field`` holds E_f sampled on F's chi grid.  The pair term enters the
    xi-shifts as -(eta/N) K'(chi1 - chi2) for particle 1 and the opposite for
    particle 2.
    """
    g = F.grid
    E = np.asarray(f_field, dtype=float)
    if E.shape != (g.n_chi,):
        raise ValueError("force samples must live on the two-particle chi grid")
    sx = g.xi * (0.5 * dt) / g.dchi
    s1 = sx[None, :, None, None]
    s2 = sx[None, None, None, :]
    v = F.values
    v = shift_axis(shift_axis(v, 0, s1, method), 2, s2, method)
    pair = (eta / N) * pair_force(K, g) if eta else 0.0
    v1 = (E[:, None] - pair) * np.ones((g.n_chi, g.n_chi))
    v2 = (E[None, :] + pair) * np.ones((g.n_chi, g.n_chi))
    v = shift_axis(v, 1, (v1 * dt / g.dxi)[:, None, :, None], method)
    v = shift_axis(v, 3, (v2 * dt / g.dxi)[:, None, :, None], method)
    v = shift_axis(shift_axis(v, 0, s1, method), 2, s2, method)
    m0 = F.values.sum() * g.cell**2
    v, clipped = _clean(v, m0, g.cell**2)
    _guard(v, g, (1, 3), tol_boundary)
    out = TwoParticleDensity(v, g)
    return (out, clipped) if return_clipped else out


@dataclass
class KineticTrajectory:
    times: list = field(default_factory=list)
    f: list = field(default_factory=list)
    F: list = field(default_factory=list)
    records: list = field(default_factory=list)
    clipped: float = 0.0


def _record(t, f, F, clipped):
    rec = {"t": t, "mass_f": f.mass, "l2_f": f.l2(), "m2_f": f.moment_xi(2),
           "clipped": clipped}
    if F is not None:
        rec["mass_F"] = F.mass
    return rec


def coupled_evolve(f: PhaseDensity, F: TwoParticleDensity | None, K: InteractionKernel,
                   T: float, dt: float, eta: int = 0, N: float = 1.0,
                   observers: Sequence[Callable] = (), sample_times: Sequence[float] | None = None,
                   method: str = "spectral", mf_factor: float = 1.0,
                   tol_boundary: float | None = TOL_BOUNDARY) -> KineticTrajectory:
    """Evolve f autonomously and F in f's field up to time T.

    A negative ``dt`` runs the system backwards for |T| time units.
    Observers are called as obs(t, f, F) and their dict outputs merged into
    the per-step records.
    """
    nsteps = int(round(abs(T) / abs(dt))) if T else 0
    if nsteps and abs(nsteps * abs(dt) - abs(T)) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T must be a multiple of dt")
    want = None if sample_times is None else sorted(int(round(abs(s) / abs(dt))) for s in sample_times)
    Kc = K.on(F.grid.spatial) if F is not None and F.grid.n_chi != K.grid.n_x else K
    same = F is not None and F.grid.n_chi == f.grid.n_chi
    traj = KineticTrajectory()
    clipped = 0.0

    def emit(i, t):
        rec = _record(t, f, F, clipped)
        for obs in observers:
            rec.update(obs(t, f, F))
        traj.records.append(rec)
        if want is None or i in want:
            traj.times.append(t)
            traj.f.append(f)
            traj.F.append(F)

    emit(0, 0.0)
    for i in range(1, nsteps + 1):
        f, E, c = vlasov_step(f, K, dt, method, mf_factor, tol_boundary=tol_boundary,
                              return_field=True)
        clipped += c
        if F is not None:
            Ec = E if same else trig_interp(E, f.grid.spatial.L, F.grid.chi)
            F, c2 = twoparticle_step(F, Ec, Kc, dt, eta, N, method, tol_boundary,
                                     return_clipped=True)
            clipped += c2
        emit(i, i * dt)
    traj.clipped = clipped
    return traj


# characteristics ------------------------------------------------------------
@dataclass
class FieldHistory:
    """Forces E(t_k + dt/2, chi) used by successive Strang steps of the one-particle solver."""

    L: float
    dt: float
    fields: list = field(default_factory=list)
    upsample: int = 64
    _fine: dict = field(default_factory=dict, repr=False)

    def force(self, k: int, chi) -> np.ndarray:
        """Force of step k at arbitrary chi: linear interpolation of the
        band-limited interpolant resampled ``upsample`` times finer."""
        if k not in self._fine:
            E = self.fields[k]
            n = E.size
            m = n * self.upsample
            c = np.fft.rfft(E)
            if n % 2 == 0:
                c[-1] *= 0.5
            self._fine[k] = np.fft.irfft(c, m) * (m / n)
        fine = self._fine[k]
        grid = np.arange(fine.size) * (self.L / fine.size)
        return np.interp(np.mod(chi, self.L), grid, fine, period=self.L)

    @property
    def T(self) -> float:
        return self.dt * len(self.fields)


def vlasov_history(f: PhaseDensity, K: InteractionKernel, T: float, dt: float,
                   method: str = "spectral", mf_factor: float = 1.0,
                   tol_boundary: float | None = TOL_BOUNDARY):
    """Run the one-particle solver to T, keeping the force used in every step."""
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a multiple of dt")
    hist = FieldHistory(f.grid.spatial.L, dt)
    for _ in range(n):
        f, E, _c = vlasov_step(f, K, dt, method, mf_factor, tol_boundary=tol_boundary,
                               return_field=True)
        hist.fields.append(E)
    return f, hist


def pull_back(hist: FieldHistory, chi, xi, t: float):
    """Feet at time 0 of the characteristics through (chi, xi) at time t.

    Inverts the same kick-drift splitting the grid solver applies, with the
    recorded forces evaluated off-grid (see FieldHistory.force).
    """
    n = int(round(t / hist.dt))
    if n > len(hist.fields) or abs(n * hist.dt - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"t = {t} is not a recorded step")
    chi = np.array(chi, dtype=float)
    xi = np.array(xi, dtype=float)
    h = 0.5 * hist.dt
    for k in range(n - 1, -1, -1):
        chi -= h * xi
        xi -= hist.dt * hist.force(k, chi)
        chi -= h * xi
    return np.mod(chi, hist.L), xi


# snapshots ------------------------------------------------------------------
_F_MAGIC = b"BDGF"
_F2_MAGIC = b"BDG2"
_PHEAD = struct.Struct("<4sIIIddd")


def save_density(path, dens) -> None:
    """Header then float64 values, chi fastest (and chi1, xi1, chi2, xi2 for F)."""
    g = dens.grid
    magic = _F2_MAGIC if isinstance(dens, TwoParticleDensity) else _F_MAGIC
    head = _PHEAD.pack(magic, 1, g.n_chi, g.n_xi, g.spatial.L, g.spatial.hbar, g.xi_max)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(dens.values.T, dtype="<f8").tobytes())


def load_density(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, ver, nc, nxi, L, hbar, xmax = _PHEAD.unpack_from(raw)
    if magic not in (_F_MAGIC, _F2_MAGIC) or ver != 1:
        raise ValueError(f"not a density snapshot: {path}")
    g = PhaseGrid(SpatialGrid(L, nc, hbar), nxi, xmax)
    body = np.frombuffer(raw, dtype="<f8", offset=_PHEAD.size)
    if magic == _F_MAGIC:
        return PhaseDensity(body.reshape(nxi, nc).T.copy(), g)
    return TwoParticleDensity(body.reshape(nxi, nc, nxi, nc).T.copy(), g)
