import warnings

import numpy as np
import pytest

from bdglab.errors import InvariantError, UndefinedMarginalError
from bdglab.kinetic import PhaseDensity
from bdglab.state import (DensityOperator, PairingState, QuantumState, load_snapshot,
                          pairing_marginal, quasifree_init, quasifree_residual, save_snapshot)

from conftest import gaussian_f


@pytest.fixture
def qf(grid, pgrid):
    f = PhaseDensity(gaussian_f(pgrid, wc=0.2, wx=0.2), pgrid)
    N = 0.25 / grid.h
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return quasifree_init(f, 0.99, grid, N, return_info=True)


def test_quasifree_init_is_admissible(qf):
    st, info = qf
    st.op.check()
    st.pairing.check()
    assert abs(st.op.trace - 1) < 1e-12
    assert info.residual == pytest.approx(quasifree_residual(st.op, st.pairing))
    assert info.clipped_mass < 1e-12


def test_theta_target_attained_or_reported(qf):
    st, info = qf
    if info.attained:
        assert st.pairing.theta == pytest.approx(0.99, abs=1e-12)
    else:
        assert st.pairing.theta == pytest.approx(info.theta_max)
        assert info.warnings


def test_full_pairing_is_pure(grid, pgrid):
    f = PhaseDensity(gaussian_f(pgrid, wc=0.2, wx=0.2), pgrid)
    N = 0.25 / grid.h
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        st, info = quasifree_init(f, 0.999999, grid, N, return_info=True)
    assert info.theta_achieved == pytest.approx(info.theta_max)
    assert info.residual < 1e-10


def test_antisymmetric_pairing(grid, pgrid):
    f = PhaseDensity(gaussian_f(pgrid, wc=0.2, wx=0.2), pgrid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        st = quasifree_init(f, 0.5, grid, 0.25 / grid.h, symmetry="antisymmetric")
    k = st.pairing.kernel
    assert np.allclose(k, -k.T)
    assert st.pairing.sign == -1


def test_init_rejects_bad_theta(grid, pgrid):
    f = PhaseDensity(gaussian_f(pgrid), pgrid)
    with pytest.raises(ValueError):
        quasifree_init(f, 1.0, grid, 10.0)


def test_invariant_violation_detected(grid):
    k = np.eye(grid.n_x, dtype=complex) / (grid.h * grid.dx * grid.n_x)
    op = DensityOperator(k, grid, 1.0)
    op.check()
    bad = DensityOperator(k.copy(), grid, 1.0)
    bad.kernel[0, 1] = 1.0
    with pytest.raises(InvariantError):
        bad.check()
    with pytest.raises(InvariantError):
        DensityOperator(2 * k, grid, 1.0).check()


def test_pairing_symmetry_enforced(grid):
    rng = np.random.default_rng(3)
    a = rng.standard_normal((grid.n_x, grid.n_x))
    with pytest.raises(InvariantError):
        PairingState(a.astype(complex), "symmetric", grid, 1e4).check()
    with pytest.raises(ValueError):
        PairingState(a.astype(complex), "other", grid, 1.0)


def test_pairing_marginal_needs_theta(grid):
    with pytest.raises(UndefinedMarginalError):
        pairing_marginal(PairingState.zero(grid, 5.0))


def test_marginal_has_unit_trace(qf):
    st, _ = qf
    m = pairing_marginal(st.pairing)
    assert np.isclose(st.grid.h * st.grid.dx * np.trace(m).real, 1.0)


def test_snapshot_roundtrip(tmp_path, qf):
    st, _ = qf
    p = tmp_path / "s.bdgs"
    save_snapshot(p, st)
    back = load_snapshot(p, time=0.25)
    assert back.time == 0.25 and back.N == st.N and back.grid == st.grid
    scale = np.abs(st.op.kernel).max()
    assert np.abs(back.op.kernel - st.op.kernel).max() < 1e-6 * scale
    assert back.pairing.symmetry == st.pairing.symmetry


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "x.bdgs"
    p.write_bytes(b"\0" * 64)
    with pytest.raises(ValueError):
        load_snapshot(p)


def test_state_requires_matching_parts(grid):
    op = DensityOperator(np.eye(grid.n_x, dtype=complex), grid, 1.0)
    with pytest.raises(ValueError):
        QuantumState(op, PairingState.zero(grid, 2.0))
