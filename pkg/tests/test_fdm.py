import math
import warnings

import numpy as np
import pytest

from planar_monopole import fdm, model
from planar_monopole.errors import DomainError, LifetimeTooLongError
from planar_monopole.model import MonopoleConfig, PotentialKind

CFG = MonopoleConfig(100.0, 1)
SMALL_SURVIVAL_GRID = fdm.RadialGrid(0.0, 40.0, 2500)


def _lowest(grid, v, k):
    return fdm.eigensolve(fdm.build_hamiltonian(grid, v=v), k=k).eigenvalues


def test_particle_in_a_box_converges_at_second_order():
    exact = np.array([1.0, 4.0, 9.0])
    errs = [np.abs(_lowest(fdm.RadialGrid(0, math.pi, n), lambda r: 0 * r, 3) - exact)
            for n in (500, 999)]
    np.testing.assert_allclose(errs[0] / errs[1], 4.0, rtol=0.02)
    assert errs[1].max() < 2e-4


def test_harmonic_oscillator_converges_at_second_order():
    exact = np.array([1.0, 3.0, 5.0])
    errs = [np.abs(_lowest(fdm.RadialGrid(0, 20, n), lambda r: (r - 10) ** 2, 3) - exact)
            for n in (1001, 2001)]
    np.testing.assert_allclose(errs[0] / errs[1], 4.0, rtol=0.02)


def test_grid_validation():
    with pytest.raises(DomainError):
        fdm.RadialGrid(1.0, 1.0, 10)
    with pytest.raises(DomainError):
        fdm.RadialGrid(0.0, 1.0, 2)
    g = fdm.RadialGrid(0.0, 1.0, 11)
    assert g.h == pytest.approx(0.1)
    assert g.interior[0] == pytest.approx(0.1) and g.interior.size == 9


def test_hamiltonian_matches_dense_scipy():
    g = fdm.RadialGrid(0.0, 5.0, 200)
    op = fdm.build_hamiltonian(g, CFG)
    ref = np.linalg.eigvalsh(op.dense())
    spec = fdm.eigensolve(op, k=20)
    np.testing.assert_allclose(spec.eigenvalues, ref[:20], rtol=1e-12)


def test_quasibound_levels_m1():
    qb = fdm.quasibound_states(CFG)
    eps = [s.epsilon for s in qb.states]
    np.testing.assert_allclose(eps, [287.789, 456.929, 606.866, 736.685, 844.654, 926.093], atol=2e-3)
    assert all(w >= fdm.WEIGHT_THRESHOLD for w in qb.well_weight)
    assert all(e < qb.barrier_height for e in eps)
    assert [s.n for s in qb.states] == list(range(6))


def test_threshold_filters_states():
    strict = fdm.quasibound_states(CFG, threshold=0.95)
    assert len(strict) == 5  # the top level leaks 9% of its weight


def test_no_state_without_well():
    assert len(fdm.quasibound_states(MonopoleConfig(100.0, 20))) == 0


def test_m_range_covers_the_well():
    r = fdm.m_range_for(60.0)
    assert r.start <= -60 and r.stop - 1 >= math.ceil(model.m_over_lambda_max() * 60)


def test_modified_potential_is_flat_beyond_peak():
    v_mod, rho_peak, v_peak = fdm.modified_potential(CFG)
    assert v_mod(rho_peak * 3) == v_peak
    r = 0.5 * rho_peak
    assert v_mod(r) == pytest.approx(model.potential(r, CFG, PotentialKind.QUANTUM))


def test_echo_time():
    assert fdm.echo_time(fdm.RadialGrid(0, 160, 10), 1.5, 900.0) == pytest.approx(158.5 / 30)


def test_survival_on_small_grid():
    life = fdm.fd_half_life(CFG, 5, SMALL_SURVIVAL_GRID)
    s = life.survival
    assert s.probability[0] == pytest.approx(1.0, abs=0.05)
    assert np.all(np.diff(s.probability[:20]) < 0)
    assert s.completeness > 1 - 1e-5
    assert life.rate == pytest.approx(0.2615, rel=0.02)
    # the echo window on this grid closes before P reaches 1/2
    assert life.tau_crossing is None


def test_survival_sample_count():
    s = fdm.survival_probability(CFG, 5, SMALL_SURVIVAL_GRID, samples=17)
    assert s.times.size == 17 and s.times[-1] == pytest.approx(s.echo_time)


def test_deep_state_lifetime_too_long():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(LifetimeTooLongError):
            fdm.fd_half_life(CFG, 0, SMALL_SURVIVAL_GRID)



def test_spectrum_orthonormal_with_small_residuals():
    spec = fdm.eigensolve(fdm.build_hamiltonian(fdm.DEFAULT_GRID, CFG), k=60)
    v = spec.eigenvectors
    np.testing.assert_allclose(v.T @ v, np.eye(60), atol=1e-9)
    assert spec.converged.all() and spec.residuals.max() < 1e-6
