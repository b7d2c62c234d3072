"""Checkable inequalities along a BdG trajectory, one row per inequality.

Growth bounds of the form g(t) <= g(0) + C t are reported through the worst
observed rate max_t (g(t) - g(0)) / t against C, so the margin measures the
unused fraction of the allowed growth.  Tolerance rows (conservation) compare
a drift with a fixed budget.  A row passes when its margin is
non-negative up to rounding; BOUND_SLACK is the stricter level asked of the
a-priori bounds on the default configuration.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..bdg import BdGConfig, BdGTrajectory, dt_max, theta_trajectory_check
from ..interaction import InteractionKernel

BOUND_SLACK = 0.05
MARGIN_TOL = 1e-9
BOUND_ROWS = ("kinetic bound M2 <= C_EK", "moment growth sqrt(M4)", "moment growth sqrt(N2)",
              "schatten growth p=2", "schatten growth p=4")
TRACE_TOL = 1e-8
ENERGY_TOL = 1e-6
QUASIFREE_TOL = 1e-6
THETA_LEVEL_TOL = 1e-8


@dataclass
class CheckRow:
    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _row(name, lhs, rhs, atol=0.0) -> CheckRow:
    lhs, rhs = float(lhs), float(rhs)
    if not np.isfinite(lhs):
        margin = -np.inf
    elif rhs > 0:
        margin = (rhs - lhs) / rhs
    else:
        margin = 1.0 if lhs <= atol else -np.inf
    return CheckRow(name, lhs, rhs, float(margin), bool(margin >= -MARGIN_TOL))


def _rate(values, t):
    """max over t > 0 of (g(t) - g(0)) / t."""
    later = t > 0
    if not later.any():
        return 0.0
    return float(np.max((values[later] - values[0]) / t[later]))


@dataclass(frozen=True)
class Constants:
    energy0: float
    C_EK: float
    C_moment: float
    C_schatten: float


def constants(energy0: float, K: InteractionKernel, N: float) -> Constants:
    """Constants of the a-priori bounds at d = 1.

    The energy carries |p|^2 / 2, so the kinetic bound on h Tr(|p|^2 op)
    reads 2 (E + 2 ||K||_inf).
    """
    g = K.grid
    cek = 2.0 * (energy0 + 2.0 * K.sup)
    cm = 3.0 * (g.hbar * K.sup_lap + 2.0 * K.sup_grad * np.sqrt(max(cek, 0.0)))
    cs = 2.0 * K.l1_hat / (N * g.hbar)
    return Constants(energy0, cek, cm, cs)


def trajectory_rows(traj: BdGTrajectory, K: InteractionKernel, N: float,
                    cfg: BdGConfig) -> list[CheckRow]:
    rows = []
    lim = dt_max(K.grid, K, cfg)
    rows.append(_row("stability dt <= dt_max", cfg.dt, lim))
    if traj.diverged:
        for name, tol in (("trace conservation", TRACE_TOL), ("energy conservation", ENERGY_TOL),
                          ("quasi-free preservation", QUASIFREE_TOL)):
            rows.append(_row(name, np.inf, tol))
        return rows
    t = traj.column("t") - traj.column("t")[0]
    trace, E = traj.column("trace"), traj.column("energy")
    e0 = float(E[0])
    rows.append(_row("trace conservation", np.abs(trace - 1.0).max(), TRACE_TOL))
    # relative budget; an exactly zero energy falls back to an absolute one
    rows.append(_row("energy conservation", np.abs(E - e0).max(), ENERGY_TOL * (abs(e0) or 1.0)))
    qf = traj.column("quasifree_residual")
    rows.append(_row("quasi-free preservation", max(qf.max() - qf[0], 0.0), QUASIFREE_TOL))

    c = constants(e0, K, N)
    rows.append(_row("kinetic bound M2 <= C_EK", traj.column("M2").max(), c.C_EK))
    rows.append(_row("moment growth sqrt(M4)", _rate(np.sqrt(traj.column("M4")), t), c.C_moment,
                     atol=1e-9))
    rows.append(_row("moment growth sqrt(N2)", _rate(np.sqrt(traj.column("N2")), t),
                     np.sqrt(max(c.C_EK, 0.0)), atol=1e-9))
    for col, p in (("schatten_2", cfg.schatten_p[0]), ("schatten_d", cfg.schatten_p[1])):
        s = traj.column(col)
        rows.append(_row(f"schatten growth p={p:g}", _rate(np.log(s), t), c.C_schatten, atol=1e-9))
    # theta <= 1 - N h ||op||_2^2 (equality for pure states)
    h = K.grid.h
    excess = traj.column("theta") - (1.0 - N * h * traj.column("schatten_2") ** 2)
    rows.append(_row("theta level bound", excess.max(), THETA_LEVEL_TOL))
    chk = theta_trajectory_check(traj, K, h)
    rows.append(_row("theta growth bound", chk.bound_ratio, 1.0))
    return rows


def all_passed(rows) -> bool:
    return all(r.passed for r in rows)
