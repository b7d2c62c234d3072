"""Single runs, hbar sweeps and the validation table."""
from __future__ import annotations

import csv
import json
import math
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..bdg import OBSERVER_COLUMNS, BdGConfig, evolve
from ..errors import InsufficientData
from ..grid import PhaseGrid
from ..interaction import InteractionKernel
from ..kinetic import (PhaseDensity, TwoParticleDensity, coupled_evolve, pull_back,
                       save_density, vlasov_history)
from ..metrics import MetricReport, sobolev_negative_norm, w2_grid
from ..state import quasifree_init, save_snapshot
from ..transforms import husimi, husimi_two_particle, husimi_two_particle_at
from .checks import all_passed, trajectory_rows
from .config import RunConfig, dump_config

SCHEMA = 1
VERSION = f"bdglab {__version__}"
METRIC_COLUMNS = ["w2sq", "h_minus1_sq", "h_minus6", "total"]
MIN_CELLS = 4
_SERIES_POINTS = 101


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(float(v), ".17g")


def _clean_json(obj):
    """Replace non-finite floats so the report stays strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_json(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean_json(obj.item())
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean_json(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def echo(cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.json")
    (out / "VERSION").write_text(VERSION + "\n")


def _sample(fun, pg: PhaseGrid) -> tuple[np.ndarray, float]:
    C, X = np.meshgrid(pg.chi, pg.xi, indexing="ij")
    v = fun(C, X)
    z = float(v.sum() * pg.cell)
    return v / z, z


def _bdg_config(cfg: RunConfig, T: float | None = None, dt: float | None = None) -> BdGConfig:
    return BdGConfig(dt=dt or cfg.dt, T=cfg.T if T is None else T, integrator=cfg.integrator,
                     include_exchange=cfg.include_exchange, spinless_mode=cfg.spinless_mode,
                     stride=cfg.observe_every)


def _check_times(cfg: RunConfig):
    for t in cfg.sample_times:
        for step, what in ((cfg.dt * cfg.observe_every, "dt * observe_every"), (cfg.kinetic.dt, "kinetic dt")):
            k = t / step
            if abs(k - round(k)) > 1e-9 * max(1.0, k):
                raise ValueError(f"sample time {t} is not a multiple of {what} = {step:g}")


# classical side ------------------------------------------------------------------
def reference_density(cfg: RunConfig, pg: PhaseGrid, f0fun) -> tuple[PhaseDensity, float]:
    """f0 on the fine one-particle grid of the kinetic solver, with its normalizer."""
    kin = cfg.kinetic
    pref = PhaseGrid(pg.spatial.with_points(kin.n_chi), kin.n_xi, kin.xi_max or 2.0 * pg.xi_max)
    v, z = _sample(f0fun, pref)
    return PhaseDensity(v, pref), z


class ClassicalSide:
    """f(t) on the Wigner grid and F(t) on the coarse two-particle grid.

    f is evaluated along characteristics of a fine-grid Vlasov run.  F either
    follows the same characteristics (eta = 0) or is transported on its own
    grid with the pair force switched by eta.
    """

    def __init__(self, cfg: RunConfig, f0fun, pg: PhaseGrid, K: InteractionKernel, state):
        kin = cfg.kinetic
        self.cfg, self.f0fun, self.pg, self.state = cfg, f0fun, pg, state
        fref, self.z_ref = reference_density(cfg, pg, f0fun)
        Kref = K.on(fref.grid.spatial)
        mf = 2.0 if cfg.spinless_mode else 1.0
        _, self.hist = vlasov_history(fref, Kref, cfg.T, kin.dt, kin.method, mf)
        self.C, self.X = np.meshgrid(pg.chi, pg.xi, indexing="ij")
        self.pgF = PhaseGrid.coarse(pg, kin.F_points, kin.F_points)
        self.two = cfg.metrics.two_particle and state.pairing.theta > 0
        self._F = {}
        if self.two and kin.F_method == "grid":
            F0 = self._F0_grid()
            traj = coupled_evolve(fref, F0, Kref, cfg.T, kin.dt, cfg.eta,
                                  state.N, sample_times=cfg.sample_times, method=kin.method,
                                  mf_factor=mf)
            for t, F in zip(traj.times, traj.F):
                self._F[round(t, 12)] = F.values

    def _F0_grid(self) -> TwoParticleDensity:
        if self.cfg.initial.F0 == "husimi":
            return husimi_two_particle(self.state.pairing, self.pgF)
        v, _ = _sample(self.f0fun, self.pgF)
        return TwoParticleDensity.product(PhaseDensity(v, self.pgF))

    def f(self, t: float) -> PhaseDensity:
        c0, x0 = pull_back(self.hist, self.C, self.X, t)
        v = self.f0fun(c0, x0)
        return PhaseDensity(v / (v.sum() * self.pg.cell), self.pg)

    def F(self, t: float) -> np.ndarray:
        if self.cfg.kinetic.F_method == "grid":
            return self._F[round(t, 12)]
        CF, XF = np.meshgrid(self.pgF.chi, self.pgF.xi, indexing="ij")
        c0, x0 = pull_back(self.hist, CF.ravel(), XF.ravel(), t)
        if self.cfg.initial.F0 == "husimi":
            v = husimi_two_particle_at(self.state.pairing, (c0, x0), (c0, x0))
        else:
            p = self.f0fun(c0, x0) / self.z_ref
            v = np.outer(p, p)
        return v.reshape(self.pgF.shape * 2)

    def F_quantum(self, pairing) -> np.ndarray:
        if self.cfg.kinetic.F_method == "grid":
            return husimi_two_particle(pairing, self.pgF).values
        CF, XF = np.meshgrid(self.pgF.chi, self.pgF.xi, indexing="ij")
        z = (CF.ravel(), XF.ravel())
        return husimi_two_particle_at(pairing, z, z).reshape(self.pgF.shape * 2)


def sample_metrics(fc: PhaseDensity, qstate, classical: ClassicalSide, t: float,
                   cfg: RunConfig) -> tuple[MetricReport, np.ndarray | None]:
    m = cfg.metrics
    fq = husimi(qstate.op, method=m.husimi_method)
    w2, info = w2_grid(fc, fq, m.epsilon, m.sinkhorn_tol, return_info=True)
    methods = {"one_particle": "debiased_sinkhorn_grid", "husimi": m.husimi_method}
    h1 = h6 = 0.0
    Fc = None
    if classical.two:
        Fc = classical.F(t)
        diff = Fc - classical.F_quantum(qstate.pairing)
        h1 = sobolev_negative_norm(diff, 1.0, classical.pgF)
        h6 = sobolev_negative_norm(diff, 6.0, classical.pgF)
        methods["two_particle"] = f"sobolev_h-1/{cfg.kinetic.F_method}"
    else:
        methods["two_particle"] = "undefined (theta = 0)" if m.two_particle else "off"
    rep = MetricReport(max(w2, 0.0), h1**2, h1, h6, methods,
                       {"sinkhorn_iterations": info["iterations"],
                        "marginal_violation": info["violation"], "epsilon": info["epsilon"]})
    return rep, Fc


# single run ----------------------------------------------------------------------
@dataclass
class CellResult:
    hbar: float
    N: float
    ok: bool = True
    samples: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    init: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    error: dict | None = None
    directory: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _series(traj) -> dict:
    t = traj.column("t")
    idx = np.unique(np.linspace(0, len(t) - 1, min(len(t), _SERIES_POINTS)).round().astype(int))
    E = traj.column("energy")
    return {"t": t[idx].tolist(), "trace_drift": (traj.column("trace")[idx] - 1.0).tolist(),
            "energy_drift": (E[idx] - E[0]).tolist(), "theta": traj.column("theta")[idx].tolist()}


def _write_csv(path, traj, metric_rows: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OBSERVER_COLUMNS + METRIC_COLUMNS)
        for rec in traj.records:
            m = metric_rows.get(round(rec["t"], 9), {})
            w.writerow([_fmt(rec[c]) for c in OBSERVER_COLUMNS] + [_fmt(m.get(c)) for c in METRIC_COLUMNS])


def run_single(cfg: RunConfig, hbar: float | None = None, out=None) -> CellResult:
    """One (hbar, N) cell: quantum and classical evolution side by side plus metrics."""
    hbar = cfg.hbar[0] if hbar is None else float(hbar)
    _check_times(cfg)
    g = cfg.spatial_grid(hbar)
    pg = cfg.phase_grid(hbar)
    N = cfg.particle_number(hbar)
    res = CellResult(hbar, N)
    f0fun = cfg.initial.density(cfg.L)
    v0, _ = _sample(f0fun, pg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        state, info = quasifree_init(PhaseDensity(v0, pg), cfg.initial.theta_target, g, N,
                                     cfg.initial.symmetry, return_info=True)
    res.warnings += [str(w.message) for w in caught]
    K = InteractionKernel.from_spec(cfg.kernel, g)
    bcfg = _bdg_config(cfg)
    traj = evolve(state, K, bcfg, sample_times=cfg.sample_times)
    alpha_l2 = math.sqrt(N * state.pairing.theta)
    res.init = {"theta_target": info.theta_target, "theta": info.theta_achieved,
                "theta_max": info.theta_max, "clipped_mass": info.clipped_mass,
                "quasifree_residual": info.residual, "M4": traj.records[0]["M4"],
                "alpha_l2_over_Nh": alpha_l2 / (N * g.h), "N_hbar": N * hbar, "N_h": N * g.h,
                "kernel": K.manifest()}
    res.checks = [r.to_dict() for r in trajectory_rows(traj, K, N, bcfg)]
    res.series = _series(traj)

    classical = ClassicalSide(cfg, f0fun, pg, K, state)
    out = Path(out) if out is not None else None
    metric_rows = {}
    for qs in traj.states:
        t = round(qs.time, 12)
        fc = classical.f(t)
        rep, Fc = sample_metrics(fc, qs, classical, t, cfg)
        d = rep.to_dict()
        d["t"] = t
        res.samples.append(d)
        metric_rows[round(t, 9)] = {"w2sq": rep.w2sq_one_particle, "h_minus1_sq": rep.metric_two_particle,
                                    "h_minus6": rep.sobolev_h6, "total": rep.total}
        if out is not None and cfg.snapshots:
            out.mkdir(parents=True, exist_ok=True)
            tag = f"t{t:.4f}"
            save_snapshot(out / f"state_{tag}.bdgs", qs)
            save_density(out / f"f_{tag}.bdgf", fc)
            if Fc is not None:
                save_density(out / f"F_{tag}.bdg2", TwoParticleDensity(Fc, classical.pgF))
    if out is not None:
        echo(cfg.single(hbar), out)
        _write_csv(out / "observer.csv", traj, metric_rows)
        res.directory = "."
        write_json(out / "metrics.json", {"schema": SCHEMA, "version": VERSION, **res.to_dict()})
    return res


# sweep ---------------------------------------------------------------------------
def _cell_job(args) -> CellResult:
    cfg_dict, hbar, out = args
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        res = run_single(cfg, hbar, out)
    except Exception as exc:  # crash isolation: the error becomes data
        res = _failed(hbar, cfg, exc, out)
    res.directory = Path(out).name
    return res


def _failed(hbar, cfg, exc, out) -> CellResult:
    try:
        N = cfg.particle_number(hbar)
    except Exception:
        N = float("nan")
    err = {"type": type(exc).__name__, "message": str(exc),
           "traceback": traceback.format_exception_only(type(exc), exc)[-1].strip()}
    res = CellResult(hbar, N, ok=False, error=err, directory=Path(out).name)
    Path(out).mkdir(parents=True, exist_ok=True)
    write_json(Path(out) / "error.json", {"schema": SCHEMA, "version": VERSION, **res.to_dict()})
    return res


def cell_name(i: int, hbar: float) -> str:
    return f"cell_{i:02d}_hbar_{hbar:.6e}"


def fit_slope(x, y, n_boot: int = 2000, seed: int = 0) -> dict:
    """Least-squares slope of log y on log x with a 95% pair-bootstrap interval."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    x, y = np.log(x[ok]), np.log(y[ok])
    n = x.size
    if n < 2:
        return {"slope": None, "intercept": None, "ci95": [None, None], "pm": None, "n": int(n)}
    slope, icpt = np.polyfit(x, y, 1)
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, n)
        if np.ptp(x[idx]) == 0:
            continue
        boots.append(np.polyfit(x[idx], y[idx], 1)[0])
    lo, hi = (np.percentile(boots, [2.5, 97.5]) if boots else (slope, slope))
    return {"slope": float(slope), "intercept": float(icpt), "ci95": [float(lo), float(hi)],
            "pm": float(0.5 * (hi - lo)), "n": int(n)}


def build_report(cfg: RunConfig, cells: list[CellResult]) -> dict:
    rows = []
    for c in cells:
        if not c.ok:
            continue
        flags = {r["name"]: r["passed"] for r in c.checks}
        for s in c.samples:
            drift = _drift_at(c.series, s["t"])
            rows.append({"hbar": c.hbar, "N": c.N, "t": s["t"], "metrics": s,
                         "total": s["total"], **drift, "flags": flags})
    fits = []
    good = [c for c in cells if c.ok]
    for t in cfg.sample_times:
        x, y, ysub = [], [], []
        for c in good:
            s = _at(c.samples, t)
            s0 = _at(c.samples, 0.0)
            if s is None:
                continue
            x.append(c.hbar)
            y.append(s["total"])
            ysub.append(s["total"] - s0["total"] if s0 is not None else np.nan)
        raw = fit_slope(x, y, seed=cfg.seed)
        sub = fit_slope(x, ysub, seed=cfg.seed) if t > 0 else None
        fits.append({"t": t, "hbar": x, "total": y, "fit": raw,
                     "total_minus_t0": ysub if t > 0 else None, "fit_minus_t0": sub})
    return {
        "schema": SCHEMA, "version": VERSION, "config": cfg.resolved(),
        "warnings": cfg.regime_warnings(),
        "rows": rows, "fits": fits,
        "cells": [{"hbar": c.hbar, "N": c.N, "ok": c.ok, "error": c.error, "directory": c.directory,
                   "init": c.init, "checks": c.checks, "series": c.series, "warnings": c.warnings}
                  for c in cells],
        "n_success": len(good),
        "all_validation_pass": bool(good) and all(all(r["passed"] for r in c.checks) for c in good),
    }


def _at(samples, t):
    for s in samples:
        if abs(s["t"] - t) < 1e-9:
            return s
    return None


def _drift_at(series, t) -> dict:
    ts = np.asarray(series.get("t", []))
    if ts.size == 0:
        return {"trace_drift": None, "energy_drift": None}
    i = int(np.argmin(np.abs(ts - t)))
    return {"trace_drift": series["trace_drift"][i], "energy_drift": series["energy_drift"][i]}


def run_sweep(cfg: RunConfig, out) -> dict:
    """All hbar cells, each isolated in its own subdirectory; writes report.json."""
    out = Path(out)
    echo(cfg, out)
    jobs = [(cfg.resolved(), h, str(out / cell_name(i, h))) for i, h in enumerate(cfg.hbar)]
    if cfg.workers > 1 and len(jobs) > 1:
        cells = []
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_cell_job, j) for j in jobs]
            for (cd, h, o), fut in zip(jobs, futures):
                try:
                    cells.append(fut.result())
                except Exception as exc:  # worker died outright
                    cells.append(_failed(h, cfg, exc, o))
                    cells[-1].directory = Path(o).name
    else:
        cells = [_cell_job(j) for j in jobs]
    report = build_report(cfg, cells)
    if report["n_success"] < MIN_CELLS:
        report["error"] = {"type": "InsufficientData",
                           "message": f"{report['n_success']} successful runs, need {MIN_CELLS}"}
        write_json(out / "report.json", report)
        raise InsufficientData(report["error"]["message"])
    write_json(out / "report.json", report)
    return report


# validation ----------------------------------------------------------------------
VALIDATE_HORIZON = 0.5


def validate(cfg: RunConfig, out=None, T: float | None = None) -> list[dict]:
    """Short trajectory at the first hbar; one row per inequality, never raises on failure."""
    hbar = cfg.hbar[0]
    g = cfg.spatial_grid(hbar)
    pg = cfg.phase_grid(hbar)
    N = cfg.particle_number(hbar)
    v0, _ = _sample(cfg.initial.density(cfg.L), pg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        state = quasifree_init(PhaseDensity(v0, pg), cfg.initial.theta_target, g, N,
                               cfg.initial.symmetry)
    K = InteractionKernel.from_spec(cfg.kernel, g)
    horizon = min(cfg.T, VALIDATE_HORIZON) if T is None else T
    bcfg = _bdg_config(cfg, T=horizon)
    stride = max(1, min(cfg.observe_every, int(round(horizon / cfg.dt)) // 4 or 1))
    traj = evolve(state, K, bcfg, observe_every=stride, strict=False)
    rows = [r.to_dict() for r in trajectory_rows(traj, K, N, bcfg)]
    if out is not None:
        out = Path(out)
        echo(cfg, out)
        with open(out / "validate.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["name", "lhs", "rhs", "margin", "passed"])
            for r in rows:
                w.writerow([r["name"], _fmt(r["lhs"]), _fmt(r["rhs"]), _fmt(r["margin"]),
                            "pass" if r["passed"] else "fail"])
        write_json(out / "validate.json", {"schema": SCHEMA, "version": VERSION, "hbar": hbar,
                                           "N": N, "T": horizon, "rows": rows,
                                           "all_pass": all_passed_dicts(rows)})
    return rows


def all_passed_dicts(rows) -> bool:
    return all(r["passed"] for r in rows)


__all__ = ["run_single", "run_sweep", "validate", "fit_slope", "build_report", "CellResult",
           "ClassicalSide", "sample_metrics", "SCHEMA", "VERSION", "all_passed"]
