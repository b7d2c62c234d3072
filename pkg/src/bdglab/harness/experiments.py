"""Eta-toggle experiments on the two-particle transport."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..grid import PhaseGrid
from ..interaction import InteractionKernel
from ..kinetic import PhaseDensity, TwoParticleDensity, coupled_evolve
from .config import RunConfig
from .run import _sample, reference_density, run_single


def classical_pair_difference(cfg: RunConfig, Ns=(1e3, 1e4), t: float | None = None) -> dict:
    """sup |F_eta=1 - F_eta=0| at time t for each N, product initial data.

    The pair force enters with weight 1/N, so the difference is expected to
    scale like 1/N while it stays in the linear-response range.
    """
    t = cfg.T if t is None else t
    hbar = cfg.hbar[0]
    pg = cfg.phase_grid(hbar)
    kin = cfg.kinetic
    pgF = PhaseGrid.coarse(pg, kin.F_points, kin.F_points)
    f0fun = cfg.initial.density(cfg.L)
    fref, _ = reference_density(cfg, pg, f0fun)
    vF, _ = _sample(f0fun, pgF)
    F0 = TwoParticleDensity.product(PhaseDensity(vF, pgF))
    K = InteractionKernel.from_spec(cfg.kernel, fref.grid.spatial)
    mf = 2.0 if cfg.spinless_mode else 1.0

    def final(eta, N):
        tr = coupled_evolve(fref, F0, K, t, kin.dt, eta, N, sample_times=[t],
                            method=kin.method, mf_factor=mf)
        return tr.F[-1].values

    base = final(0, 1.0)
    diffs = [float(np.abs(final(1, float(N)) - base).max()) for N in Ns]
    Ns = [float(N) for N in Ns]
    slope = float(np.polyfit(np.log(Ns), np.log(diffs), 1)[0]) if len(Ns) > 1 else None
    return {"t": t, "N": Ns, "sup_diff": diffs, "sup_F": float(np.abs(base).max()),
            "ratio": diffs[0] / diffs[-1], "expected_ratio": Ns[-1] / Ns[0], "slope": slope}


def pair_tracking(cfg: RunConfig, N: float, t: float | None = None) -> dict:
    """H^-1 residual between classical F and Husimi_2(op_alpha) for eta = 0 and eta = 1 at N."""
    t = cfg.T if t is None else t
    base = RunConfig.from_dict({**cfg.resolved(), "N_rule": {"kind": "fixed", "N": float(N)},
                                "sample_times": [t], "snapshots": False})
    base.kinetic = replace(base.kinetic, F_method="grid")
    out = {}
    for eta in (0, 1):
        c = RunConfig.from_dict({**base.resolved(), "eta": eta})
        res = run_single(c)
        out[eta] = res.samples[-1]["sobolev_h1"]
    return {"t": t, "N": float(N), "h1_eta0": out[0], "h1_eta1": out[1],
            "eta1_closer": bool(out[1] < out[0])}
