import warnings

import numpy as np
import pytest

from bdglab.bdg import (OBSERVER_COLUMNS, BdGConfig, dt_max, energy, evolve, rhs, step,
                        theta_trajectory_check)
from bdglab.errors import IntegrationFailure
from bdglab.interaction import InteractionKernel
from bdglab.kinetic import PhaseDensity
from bdglab.state import quasifree_init
from bdglab.transforms import CoherentFamily

from conftest import gaussian_f


@pytest.fixture
def state(grid, pgrid):
    f = PhaseDensity(gaussian_f(pgrid, wc=0.2, wx=0.2), pgrid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return quasifree_init(f, 0.99, grid, 0.25 / grid.h)


def test_config_validation():
    with pytest.raises(ValueError):
        BdGConfig(integrator="euler")
    with pytest.raises(ValueError):
        BdGConfig(dt=0)


def test_stationary_free_plane_wave(grid):
    # a momentum eigenstate without interaction or pairing does not move
    op = CoherentFamily(grid).projector(0.5, 0.0)
    k = np.ones((grid.n_x, grid.n_x), complex) / (grid.h * grid.L)
    from bdglab.state import DensityOperator, PairingState, QuantumState
    st = QuantumState(DensityOperator(k, grid, 1.0), PairingState.zero(grid, 1.0))
    K0 = InteractionKernel.from_spec({"kind": "gaussian", "a": 0.0, "sigma": 0.1}, grid)
    dO, dA = rhs(st, K0)
    assert np.abs(dO).max() < 1e-9 and np.abs(dA).max() == 0
    assert op.trace == pytest.approx(1.0)


@pytest.mark.parametrize("integrator", ["rk4", "strang"])
def test_short_run_conserves(state, kernel, integrator):
    cfg = BdGConfig(dt=5e-4, T=0.05, integrator=integrator, stride=10)
    tr = evolve(state, kernel, cfg)
    trace = tr.column("trace")
    E = tr.column("energy")
    assert np.abs(trace - 1).max() < 1e-10
    assert np.abs(E - E[0]).max() < 1e-6 * max(1, abs(E[0]))
    assert list(tr.records[0])[: len(OBSERVER_COLUMNS)] == OBSERVER_COLUMNS


def test_step_matches_evolve(state, kernel):
    cfg = BdGConfig(dt=5e-4, T=5e-4, integrator="strang")
    a = step(state, cfg, kernel)
    b = evolve(state, kernel, cfg).states[-1]
    assert np.allclose(a.op.kernel, b.op.kernel) and a.time == pytest.approx(b.time)


def test_theta_rate_second_order(grid, pgrid):
    C, X = np.meshgrid(pgrid.chi, pgrid.xi, indexing="ij")
    v = (1 + 0.3 * np.cos(2 * np.pi * C)) / (1 + np.exp((np.abs(X) - 0.7) / 0.04))
    f = PhaseDensity(v / (v.sum() * pgrid.cell), pgrid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        st = quasifree_init(f, 0.99, grid, 1.0 / grid.h)
    K = InteractionKernel.from_spec({"kind": "gaussian", "a": 1.0, "sigma": 0.1}, grid)
    res = []
    for dt in (4e-3, 2e-3):
        tr = evolve(st, K, BdGConfig(dt=dt, T=0.1, integrator="strang", check_stability=False))
        res.append(theta_trajectory_check(tr, K, grid.h).residual)
    assert 3.0 < res[0] / res[1] < 5.0


def test_stability_bound_enforced(state, kernel):
    lim = dt_max(state.grid, kernel, BdGConfig(integrator="rk4"))
    with pytest.raises(ValueError):
        evolve(state, kernel, BdGConfig(dt=2 * lim, T=4 * lim, integrator="rk4"))


def test_non_strict_run_reports_divergence(state, kernel):
    cfg = BdGConfig(dt=0.1, T=2.0, integrator="rk4", check_stability=False)
    tr = evolve(state, kernel, cfg, strict=False)
    assert tr.diverged
    with pytest.raises((IntegrationFailure, ValueError)):
        evolve(state, kernel, cfg)


def test_sample_times_recorded(state, kernel):
    cfg = BdGConfig(dt=1e-3, T=0.01, integrator="strang", stride=5)
    tr = evolve(state, kernel, cfg, sample_times=[0.0, 0.005, 0.01])
    assert [round(t, 6) for t in tr.times] == [0.0, 0.005, 0.01]
    assert len(tr.records) == 3


def test_energy_function_matches_observer(state, kernel):
    cfg = BdGConfig(dt=1e-3, T=0.0, integrator="strang")
    tr = evolve(state, kernel, cfg)
    assert energy(state, kernel, cfg) == pytest.approx(tr.records[0]["energy"])
