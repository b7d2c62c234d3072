"""Run configuration: JSON in, resolved dataclasses out."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..grid import PhaseGrid, SpatialGrid

FAMILIES = ("gaussian", "double_bump", "plateau")
N_RULES = ("fixed", "scaled", "regime_nh")


@dataclass
class InitialSpec:
    """Classical initial datum f0 and the quasi-free construction on top of it.

    ``center`` and ``widths`` are (chi, xi) pairs with chi measured in units of L.
    """

    family: str = "gaussian"
    center: tuple = (0.5, 0.0)
    widths: tuple = (0.3, 0.2)
    separation: float = 0.5
    amplitude: float = 0.3
    edge: float = 0.7
    softness: float = 0.04
    theta_target: float = 0.99
    symmetry: str = "symmetric"
    F0: str = "husimi"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown initial family {self.family!r}")
        if self.F0 not in ("husimi", "product"):
            raise ValueError("F0 must be 'husimi' or 'product'")
        self.center = tuple(float(c) for c in self.center)
        self.widths = tuple(float(w) for w in self.widths)
        if len(self.center) != 2 or len(self.widths) != 2 or min(self.widths) <= 0:
            raise ValueError("center and widths are (chi, xi) pairs with positive widths")

    def density(self, L: float):
        """Unnormalized f0 as a callable of (chi, xi)."""
        c, xc = self.center[0] * L, self.center[1]
        wc, wx = self.widths[0] * L, self.widths[1]

        def bump_chi(chi):
            d = np.asarray(chi) - c
            return sum(np.exp(-((d + m * L) ** 2) / (2 * wc * wc)) for m in range(-3, 4))

        def bump_xi(xi, x0):
            return np.exp(-((np.asarray(xi) - x0) ** 2) / (2 * wx * wx))

        if self.family == "gaussian":
            return lambda chi, xi: bump_chi(chi) * bump_xi(xi, xc)
        if self.family == "double_bump":
            s = self.separation
            return lambda chi, xi: bump_chi(chi) * (bump_xi(xi, xc - s) + bump_xi(xi, xc + s))
        amp, edge, soft = self.amplitude, self.edge, self.softness

        def plateau(chi, xi):
            mod = 1.0 + amp * np.cos(2 * np.pi * (np.asarray(chi) - c) / L)
            return mod / (1.0 + np.exp((np.abs(xi) - edge) / soft))
        return plateau


@dataclass
class KineticSpec:
    """Classical solver settings.

    ``F_method`` is "lagrangian" (characteristics of the one-particle flow,
    eta = 0 only) or "grid" (semi-Lagrangian transport of F on an F_points^4 grid).
    """

    dt: float = 0.005
    n_chi: int = 256
    n_xi: int = 256
    xi_max: float | None = None
    method: str = "spectral"
    F_method: str = "lagrangian"
    F_points: int = 48

    def __post_init__(self):
        if self.F_method not in ("lagrangian", "grid"):
            raise ValueError("F_method must be 'lagrangian' or 'grid'")
        if self.method not in ("spectral", "spline"):
            raise ValueError("kinetic method must be 'spectral' or 'spline'")


@dataclass
class MetricSpec:
    epsilon: float | None = None
    sinkhorn_tol: float = 1e-7
    husimi_method: str = "direct"
    two_particle: bool = True


@dataclass
class RunConfig:
    L: float = 1.0
    n_x: int | None = None
    n_xi: int | None = None
    xi_max: float | None = None
    hbar: list = field(default_factory=lambda: [1 / (2 * math.pi * m) for m in (8, 12, 16, 24, 32, 48)])
    N_rule: dict = field(default_factory=lambda: {"kind": "scaled", "c": 0.25})
    kernel: dict = field(default_factory=lambda: {"kind": "gaussian", "a": 0.05, "sigma": 0.1})
    initial: InitialSpec = field(default_factory=InitialSpec)
    eta: int = 0
    dt: float = 1e-3
    T: float = 0.5
    sample_times: list = field(default_factory=lambda: [0.0, 0.25, 0.5])
    integrator: str = "strang"
    include_exchange: bool = True
    spinless_mode: bool = False
    observe_every: int = 10
    kinetic: KineticSpec = field(default_factory=KineticSpec)
    metrics: MetricSpec = field(default_factory=MetricSpec)
    snapshots: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.initial, dict):
            self.initial = InitialSpec(**self.initial)
        if isinstance(self.kinetic, dict):
            self.kinetic = KineticSpec(**self.kinetic)
        if isinstance(self.metrics, dict):
            self.metrics = MetricSpec(**self.metrics)
        if isinstance(self.hbar, (int, float)):
            self.hbar = [self.hbar]
        self.hbar = [float(h) for h in self.hbar]
        self.sample_times = sorted(float(t) for t in self.sample_times)
        if self.eta not in (0, 1):
            raise ValueError("eta must be 0 or 1")
        if not self.hbar or min(self.hbar) <= 0:
            raise ValueError("hbar list must hold positive values")
        if self.L <= 0 or self.T < 0 or self.dt <= 0:
            raise ValueError("L and dt must be positive and T non-negative")
        if any(t < 0 or t > self.T + 1e-12 for t in self.sample_times):
            raise ValueError("sample times must lie in [0, T]")
        kind = self.N_rule.get("kind")
        if kind not in N_RULES:
            raise ValueError(f"N_rule kind must be one of {N_RULES}")
        if self.eta == 1 and self.kinetic.F_method == "lagrangian":
            raise ValueError("eta = 1 needs the grid two-particle solver (kinetic.F_method = 'grid')")

    # per-hbar resolution -------------------------------------------------------
    def spatial_grid(self, hbar: float) -> SpatialGrid:
        n = self.n_x
        if n is None:
            M = self.L / (2 * math.pi * hbar)
            n = 4 * int(round(M))
            if abs(M - round(M)) > 1e-6 * M:
                raise ValueError(f"hbar = {hbar:g} is not L/(2 pi M); set n_x explicitly")
        return SpatialGrid(self.L, int(n), hbar)

    def phase_grid(self, hbar: float) -> PhaseGrid:
        g = self.spatial_grid(hbar)
        pg = PhaseGrid.wigner(g)
        if self.n_xi is not None and self.n_xi != pg.n_xi:
            raise ValueError(f"n_xi = {self.n_xi} does not match the Wigner grid ({pg.n_xi})")
        if self.xi_max is not None and not math.isclose(self.xi_max, pg.xi_max, rel_tol=1e-9):
            raise ValueError(f"xi_max = {self.xi_max} does not match the Wigner grid ({pg.xi_max:g})")
        return pg

    def particle_number(self, hbar: float) -> float:
        g = self.spatial_grid(hbar)
        kind, c = self.N_rule["kind"], float(self.N_rule.get("c", self.N_rule.get("N", 0)))
        if kind == "fixed":
            return c
        if kind == "scaled":
            return c / g.h
        return c / hbar

    def regime_warnings(self) -> list:
        """Trend of N h across the sweep against the regime implied by eta."""
        if len(self.hbar) < 2:
            return []
        nh = []
        for h in sorted(self.hbar):
            try:
                nh.append(self.particle_number(h) * self.spatial_grid(h).h)
            except ValueError:
                continue  # reported by the cell itself
        if len(nh) < 2:
            return []
        shrinking = nh[0] < 0.5 * nh[-1]
        out = []
        if self.eta == 1 and not shrinking:
            out.append("eta = 1 expects N h -> 0 across the sweep, but N h does not decrease")
        if self.eta == 0 and shrinking:
            out.append("eta = 0 expects N hbar bounded below, but N h decreases across the sweep")
        return out

    def resolved(self) -> dict:
        return asdict(self)

    def single(self, hbar: float) -> "RunConfig":
        d = self.resolved()
        d["hbar"] = [hbar]
        return RunConfig.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        cfg = RunConfig.from_dict(json.load(fh))
    for msg in cfg.regime_warnings():
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return cfg


def dump_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")
