"""Distances and observables: Wasserstein-2 (exact and entropic), negative
Sobolev norms, quantum moments and Schatten norms."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .errors import NonConvergence, SupportTooLarge
from .grid import PhaseGrid, SpatialGrid, wrap

MAX_EXACT_SUPPORT = 600


@dataclass(frozen=True)
class DiscreteMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if p.shape[0] != w.shape[0]:
            raise ValueError("one weight per support point")
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_density(cls, dens, cutoff: float = 0.0) -> "DiscreteMeasure":
        """Cell-centre atoms carrying the cell masses of a PhaseDensity."""
        g = dens.grid
        C, X = np.meshgrid(g.chi, g.xi, indexing="ij")
        w = dens.values.ravel() * g.cell
        keep = w > cutoff
        w = w[keep] / w[keep].sum()
        return cls(np.column_stack([C.ravel()[keep], X.ravel()[keep]]), w)

    @property
    def size(self) -> int:
        return self.weights.size


def sq_cost(x: np.ndarray, y: np.ndarray, period=None) -> np.ndarray:
    """Squared Euclidean cost; axes with a finite ``period`` use minimal images."""
    d = x[:, None, :] - y[None, :, :]
    if period is not None:
        for ax, L in enumerate(period):
            if L:
                d[..., ax] = wrap(d[..., ax], L)
    return (d**2).sum(-1)


# exact ---------------------------------------------------------------------
def w2_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, period=None,
             return_info: bool = False):
    """Squared W2 by solving the transport LP with HiGHS."""
    n, m = mu.size, nu.size
    if n + m > MAX_EXACT_SUPPORT:
        raise SupportTooLarge(f"total support {n + m} exceeds {MAX_EXACT_SUPPORT}; use w2_sinkhorn")
    C = sq_cost(mu.points, nu.points, period)
    from scipy.sparse import coo_matrix, vstack

    rows = coo_matrix((np.ones(n * m), (np.repeat(np.arange(n), m), np.arange(n * m))),
                      shape=(n, n * m))
    cols = coo_matrix((np.ones(n * m), (np.tile(np.arange(m), n), np.arange(n * m))),
                      shape=(m, n * m))
    A = vstack([rows, cols]).tocsr()
    b = np.concatenate([mu.weights, nu.weights])
    res = linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise NonConvergence(f"transport LP failed: {res.message}")
    primal = float(res.fun)
    dual = float(b @ res.eqlin.marginals)
    gap = abs(primal - dual)
    if gap > 1e-9 * max(1.0, abs(primal)):
        raise NonConvergence(f"primal-dual gap {gap:.2e}", gap)
    val = max(primal, 0.0)
    if return_info:
        return val, {"gap": gap, "plan": res.x.reshape(n, m)}
    return val


# entropic, dense -------------------------------------------------------------
def _sinkhorn_dense(a, b, C, eps, tol, max_iter, symmetric=False, init=None):
    la, lb = np.log(a), np.log(b)
    f, g = (np.zeros(a.size), np.zeros(b.size)) if init is None else init
    viol = np.inf
    for it in range(1, max_iter + 1):
        if symmetric:
            f = 0.5 * (f - eps * logsumexp((f[None, :] - C) / eps + la[None, :], axis=1))
            g = f
        else:
            f = -eps * logsumexp((g[None, :] - C) / eps + lb[None, :], axis=1)
            g = -eps * logsumexp((f[:, None] - C) / eps + la[:, None], axis=0)
        if it % 10 == 0 or it == max_iter:
            P = np.exp((f[:, None] + g[None, :] - C) / eps + la[:, None] + lb[None, :])
            viol = np.abs(P.sum(1) - a).sum() + np.abs(P.sum(0) - b).sum()
            if viol < tol:
                return float(a @ f + b @ g), it, viol, (f, g)
    raise NonConvergence(f"Sinkhorn did not converge in {max_iter} iterations "
                         f"(marginal violation {viol:.2e})", viol)


def _debiased(a, b, xa, xb, eps_list, tol, max_iter, period):
    Cab, Caa, Cbb = sq_cost(xa, xb, period), sq_cost(xa, xa, period), sq_cost(xb, xb, period)
    warm = [None, None, None]
    out, iters, viol = [], 0, 0.0
    for eps in eps_list:
        ab, i1, viol, warm[0] = _sinkhorn_dense(a, b, Cab, eps, tol, max_iter, False, warm[0])
        aa, i2, _, warm[1] = _sinkhorn_dense(a, a, Caa, eps, tol, max_iter, True, warm[1])
        bb, i3, _, warm[2] = _sinkhorn_dense(b, b, Cbb, eps, tol, max_iter, True, warm[2])
        out.append(ab - 0.5 * (aa + bb))
        iters += i1 + i2 + i3
    return out, iters, viol


def w2_sinkhorn(mu: DiscreteMeasure, nu: DiscreteMeasure, epsilon: float, tol: float = 1e-7,
                max_iter: int = 100000, period=None, return_info: bool = False):
    """Debiased entropic W2^2: OT_e(mu, nu) - (OT_e(mu, mu) + OT_e(nu, nu)) / 2.

    Small epsilons are reached through a geometric warm-started ladder.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    a, b = mu.weights, nu.weights
    ka, kb = a > 0, b > 0
    xa, xb = mu.points[ka], nu.points[kb]
    pts = np.vstack([xa, xb])
    top = float(sq_cost(pts, pts, period).max())
    ladder = [e for e in top * 0.5 ** np.arange(40) if e > epsilon] + [epsilon]
    vals, iters, viol = _debiased(a[ka], b[kb], xa, xb, ladder, tol, max_iter, period)
    if return_info:
        return vals[-1], {"iterations": iters, "violation": viol}
    return vals[-1]


def w2_sinkhorn_extrapolated(mu, nu, scales=(1e-3, 5e-4, 2.5e-4), tol=1e-7,
                             max_iter=100000, period=None):
    """Quadratic fit of S_eps through three epsilons (fractions of diam^2), value at 0."""
    a, b = mu.weights, nu.weights
    ka, kb = a > 0, b > 0
    xa, xb = mu.points[ka], nu.points[kb]
    pts = np.vstack([xa, xb])
    diam2 = float(sq_cost(pts, pts, period).max())
    eps = np.sort(np.array(scales) * diam2)[::-1]
    ladder = list(diam2 * 0.5 ** np.arange(1, 40))
    ladder = [e for e in ladder if e > eps[0]] + list(eps)
    vals, _, _ = _debiased(a[ka], b[kb], xa, xb, ladder, tol, max_iter, period)
    vals = np.array(vals[-len(eps):])
    coef = np.polyfit(eps, vals, len(eps) - 1)
    return float(coef[-1]), eps, vals


# entropic, separable grid ---------------------------------------------------
def _axis_cost(pts, period):
    d = pts[:, None] - pts[None, :]
    if period:
        d = wrap(d, period)
    return d**2


class _LogKernel:
    """Blocked log-domain product with a fixed matrix B: v -> log sum_l exp(v_l + B[k, l]).

    The sum over l is cut into short blocks, each evaluated as a matrix
    product with its own max shifts, and the block results are combined with
    a log-sum-exp.  Within a block neither factor spans enough range to
    underflow where it matters; leftover non-finite entries are redone exactly.
    """

    def __init__(self, B, block: int | None = None, spread: float = 500.0):
        self.B = B
        k, n = B.shape
        if block is None:
            block = _block_size(B, spread)
        self.block = block
        self.nb = -(-n // block)
        self.pad = self.nb * block - n
        Bp = np.concatenate([B, np.full((k, self.pad), -np.inf)], axis=1) if self.pad else B
        Bb = Bp.reshape(k, self.nb, block).transpose(1, 2, 0)   # (nb, block, k)
        self.bm = Bb.max(axis=1, keepdims=True)
        with np.errstate(under="ignore", invalid="ignore"):
            self.expB = np.exp(Bb - self.bm)

    def apply(self, v, axis):
        v = np.moveaxis(v, axis, -1)
        lead = v.shape[:-1]
        vp = np.concatenate([v, np.full(lead + (self.pad,), -np.inf)], axis=-1) if self.pad else v
        vb = vp.reshape(-1, self.nb, self.block).transpose(1, 0, 2)  # (nb, rows, block)
        with np.errstate(divide="ignore", under="ignore", invalid="ignore"):
            m = vb.max(axis=-1, keepdims=True)
            part = np.log(np.exp(vb - m) @ self.expB) + m + self.bm
            top = part.max(axis=0)
            out = top + np.log(np.exp(part - top).sum(axis=0))
        out = out.reshape(lead + (self.B.shape[0],))
        bad = ~np.isfinite(out)
        if bad.any():
            idx = np.nonzero(bad)
            out[idx] = logsumexp(v[idx[:-1]] + self.B[idx[-1]], axis=-1)
        return np.moveaxis(out, -1, axis)


def _block_size(B, spread):
    """Largest power-of-two block over which every row of B varies by at most ``spread``.

    A term that underflows inside such a block is below e^(spread - 745)
    times the block's leading term, so dropping it is harmless.
    """
    k, n = B.shape
    best = 1
    size = 2
    while size <= n:
        nb = -(-n // size)
        Bp = np.concatenate([B, np.repeat(B[:, -1:], nb * size - n, axis=1)], axis=1)
        blocks = Bp.reshape(k, nb, size)
        if (blocks.max(axis=2) - blocks.min(axis=2)).max() > spread:
            break
        best = size
        size *= 2
    return best


def _lse_apply(v, B, axis):
    """log sum_l exp(v[..., l, ...] + B[k, l]) along ``axis``, result indexed by k there."""
    return _LogKernel(B).apply(v, axis)


def w2_grid(f, g, epsilon: float | None = None, tol: float = 1e-7, max_iter: int = 5000,
            anneal: float = 0.5, periodic_chi: bool = True, return_info: bool = False):
    """Debiased entropic W2^2 between two densities on the same PhaseGrid.

    The ground cost is separable (periodic chi, Euclidean xi) so every
    soft-min is two one-axis log-sum-exp contractions.  epsilon is annealed
    geometrically from the squared box size down to the target.
    """
    pg: PhaseGrid = f.grid
    if not pg.same_box(g.grid) or f.values.shape != g.values.shape:
        raise ValueError("densities must share a phase grid")
    if epsilon is None:
        epsilon = default_grid_epsilon(pg)
    Cc = _axis_cost(pg.chi, pg.spatial.L if periodic_chi else None)
    Cx = _axis_cost(pg.xi, None)
    a = f.values * pg.cell
    b = g.values * pg.cell
    a = a / a.sum()
    b = b / b.sum()
    tiny = 1e-300
    la, lb = np.log(np.maximum(a, tiny)), np.log(np.maximum(b, tiny))
    la[a <= 0] = -np.inf
    lb[b <= 0] = -np.inf

    kernels = {}

    def softmin(pot, lw, eps):
        if eps not in kernels:
            kernels.clear()
            kernels[eps] = (_LogKernel(-Cx / eps), _LogKernel(-Cc / eps))
        kx, kc = kernels[eps]
        v = pot / eps + lw
        v = np.where(np.isfinite(v), v, -1e300)
        return -eps * kc.apply(kx.apply(v, 1), 0)

    def solve(lx, ly, sym):
        fpot = np.zeros(pg.shape)
        gpot = np.zeros(pg.shape)
        eps = max(epsilon, (pg.spatial.L**2 + (2 * pg.xi_max) ** 2) / 4)
        iters = 0
        viol = np.inf
        while True:
            for it in range(max_iter):
                if sym:
                    fpot = 0.5 * (fpot + softmin(fpot, lx, eps))
                    gpot = fpot
                else:
                    fpot = softmin(gpot, ly, eps)
                    gpot = softmin(fpot, lx, eps)
                iters += 1
                if eps == epsilon and it % 5 == 4:
                    # row marginal of the plan; the column one holds after the g update
                    if sym:
                        row = np.exp(lx + (fpot - softmin(fpot, lx, eps)) / eps)
                    else:
                        row = np.exp(lx + (fpot - softmin(gpot, ly, eps)) / eps)
                    viol = float(np.abs(row - np.exp(lx)).sum())
                    if viol < tol:
                        break
                elif eps > epsilon and it >= 20:
                    break
            if eps == epsilon:
                break
            eps = max(epsilon, eps * anneal)
        if viol >= tol:
            raise NonConvergence(f"grid Sinkhorn stalled at violation {viol:.2e}", viol)
        wx, wy = np.exp(lx), np.exp(ly)
        return float((wx * np.where(wx > 0, fpot, 0)).sum() + (wy * np.where(wy > 0, gpot, 0)).sum()), iters, viol

    ab, i1, v1 = solve(la, lb, False)
    aa, i2, _ = solve(la, la, True)
    bb, i3, _ = solve(lb, lb, True)
    val = ab - 0.5 * (aa + bb)
    if return_info:
        return val, {"iterations": i1 + i2 + i3, "violation": v1, "epsilon": epsilon}
    return val


def default_grid_epsilon(pg: PhaseGrid) -> float:
    return max(1e-3, 4.0 * max(pg.dchi, pg.dxi) ** 2)


# Sobolev --------------------------------------------------------------------
def sobolev_negative_norm(values, s: float, grid: PhaseGrid) -> float:
    """H^{-s} norm on the 2- or 4-dimensional phase torus of ``grid``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    v = np.asarray(values, dtype=float)
    nd = v.ndim
    if nd not in (2, 4):
        raise ValueError("expected a 2-D or 4-D grid function")
    kc = 2 * np.pi * np.fft.fftfreq(grid.n_chi, grid.dchi)
    kx = 2 * np.pi * np.fft.fftfreq(grid.n_xi, grid.dxi)
    axes_k = [kc, kx] * (nd // 2)
    k2 = np.zeros(v.shape)
    for ax, k in enumerate(axes_k):
        shape = [1] * nd
        shape[ax] = k.size
        k2 = k2 + (k**2).reshape(shape)
    vhat = np.fft.fftn(v)
    cell = grid.cell ** (nd // 2)
    tot = (np.abs(vhat) ** 2 * (1.0 + k2) ** (-s)).sum() * cell / v.size
    return float(np.sqrt(tot))


# moments and Schatten norms -----------------------------------------------
def momentum_distribution(O) -> np.ndarray:
    """Diagonal of an operator matrix in the unitary plane-wave basis (FFT order)."""
    return np.diag(np.fft.fft(np.fft.ifft(O, axis=1), axis=0)).real


def moments_from_matrix(O, g: SpatialGrid):
    nk = momentum_distribution(O)
    M2 = g.h * float((g.p**2 * nk).sum())
    M4 = g.h * float((g.p**4 * nk).sum())
    d = g.h * np.diag(O).real
    c = np.angle((d * np.exp(2j * np.pi * g.x / g.L)).sum()) * g.L / (2 * np.pi)
    r = np.abs(wrap(g.x - c, g.L))
    return M2, M4, float((d * r**2).sum()), float((d * r**4).sum())


def quantum_moments(op, grid: SpatialGrid | None = None):
    """(M2, M4, N2, N4): h Tr(op |p|^n) and h Tr(op |x - c|^n), c the circular mass centre."""
    grid = grid or op.grid
    return moments_from_matrix(op.grid.dx * op.kernel, grid)


def schatten_norm(op, p: float, grid: SpatialGrid | None = None) -> float:
    """h^{d/p} (sum |lambda|^p)^{1/p}; accepts a DensityOperator (d = 1) or a
    PairingState, for which the rank-one op_alpha on the pair space (d = 2)
    is assembled densely."""
    if p < 1:
        raise ValueError("Schatten exponent must be >= 1")
    from .state import PairingState

    grid = grid or op.grid
    if isinstance(op, PairingState):
        psi = (grid.dx * op.psi()).ravel()
        M = np.outer(psi, psi.conj()) / grid.h**2
        d = 2
    else:
        M = grid.dx * op.kernel
        d = 1
    lam = np.abs(np.linalg.eigvalsh(0.5 * (M + M.conj().T)))
    if np.isinf(p):
        return float(lam.max())
    return float(grid.h ** (d / p) * ((lam**p).sum()) ** (1.0 / p))


# report -------------------------------------------------------------------------
@dataclass
class MetricReport:
    w2sq_one_particle: float
    metric_two_particle: float
    sobolev_h1: float
    sobolev_h6: float
    methods: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.w2sq_one_particle + self.metric_two_particle

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass(frozen=True)
class MetricConfig:
    epsilon: float | None = None
    sinkhorn_tol: float = 1e-7
    husimi_method: str = "direct"
    two_particle: bool = True


def combined_error(f, op, F, pairing, cfg: MetricConfig | None = None) -> MetricReport:
    """W2^2(f, Husimi(op)) and the H^{-1}, H^{-6} norms of F - Husimi_2(op_alpha)."""
    from .transforms import husimi, husimi_two_particle

    cfg = cfg or MetricConfig()
    fq = husimi(op, method=cfg.husimi_method)
    if not fq.grid.same_box(f.grid) or fq.grid.shape != f.grid.shape:
        raise ValueError("classical density must live on the Wigner phase grid of op")
    w2, info = w2_grid(f, fq, cfg.epsilon, cfg.sinkhorn_tol, return_info=True)
    w2 = max(w2, 0.0)
    h1 = h6 = 0.0
    methods = {"one_particle": "debiased_sinkhorn_grid", "husimi": cfg.husimi_method}
    if cfg.two_particle and F is not None and pairing is not None and pairing.theta > 0:
        Fq = husimi_two_particle(pairing, F.grid)
        diff = F.values - Fq.values
        h1 = sobolev_negative_norm(diff, 1.0, F.grid)
        h6 = sobolev_negative_norm(diff, 6.0, F.grid)
        methods["two_particle"] = "sobolev_h-1"
    return MetricReport(w2, h1**2, h1, h6, methods,
                        {"sinkhorn_iterations": info["iterations"],
                         "marginal_violation": info["violation"],
                         "epsilon": info["epsilon"]})
