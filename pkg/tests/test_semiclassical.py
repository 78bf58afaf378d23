import math

import numpy as np
import pytest

from planar_monopole import fdm, model
from planar_monopole import semiclassical as sc
from planar_monopole.errors import DomainError, NotQuasiBoundError
from planar_monopole.model import MonopoleConfig, PotentialKind
from planar_monopole.semiclassical import Method

CFG = MonopoleConfig(100.0, 1)


@pytest.fixture(scope="module")
def wkb_levels():
    return sc.quantise(CFG, Method.WKB)


@pytest.mark.parametrize("scheme", ["endpoint", "angle"])
def test_harmonic_oracle_levels(scheme):
    # V = (r - 10)^2 has exact semiclassical levels 2n + 1
    well = sc.Well(lambda r: (r - 10.0) ** 2, 0.0, (10.0, 0.0), (19.0, 81.0))
    levels = sc.quantise_well(well, scheme)
    np.testing.assert_allclose(levels[:5], [1, 3, 5, 7, 9], atol=1e-7)


@pytest.mark.parametrize("scheme", ["endpoint", "angle"])
def test_quadratures_integrate_semicircle(scheme):
    rule = sc.endpoint_quadrature if scheme == "endpoint" else sc.angle_quadrature
    val = sc._converged(rule, lambda x: np.sqrt(np.maximum(1 - x * x, 0)), -1.0, 1.0)
    assert val == pytest.approx(math.pi / 2, rel=1e-10)


def test_levels_satisfy_quantisation_condition(wkb_levels):
    well = sc.Well.from_config(CFG, PotentialKind.QUANTUM)
    for s in wkb_levels:
        a = sc.action_integral(CFG, PotentialKind.QUANTUM, s.epsilon,
                               well.inner(s.epsilon), well.outer(s.epsilon))
        assert a == pytest.approx(s.n + 0.5, abs=1e-6)


def test_wkb_levels_regression(wkb_levels):
    eps = [s.epsilon for s in wkb_levels]
    np.testing.assert_allclose(eps, [276.362, 446.796, 598.091, 729.354, 838.953, 923.015], atol=2e-3)
    top = model.barrier_top(CFG, PotentialKind.QUANTUM)
    assert all(e < top.value for e in eps)


def test_wkb_equals_bohr_sommerfeld_quantum(wkb_levels):
    bs = sc.quantise(CFG, Method.BOHR_SOMMERFELD_QUANTUM)
    assert len(bs) == len(wkb_levels)
    for a, b in zip(wkb_levels, bs):
        assert round(a.epsilon, 5) == pytest.approx(round(b.epsilon, 5), abs=1.1e-5)


def test_classical_levels_sit_above_quantum(wkb_levels):
    # V_cl > V_q pushes every Bohr-Sommerfeld-classical level up
    bs = sc.quantise(CFG, Method.BOHR_SOMMERFELD_CLASSICAL)
    assert all(c.epsilon > q.epsilon for c, q in zip(bs, wkb_levels))


def test_m_zero_uses_classical_potential():
    cfg = MonopoleConfig(100.0, 0)
    with pytest.raises(DomainError):
        sc.quantise(cfg, Method.WKB)
    levels = sc.quasibound_levels(cfg)
    assert levels[0].method is Method.BOHR_SOMMERFELD_CLASSICAL
    assert levels[0].epsilon == pytest.approx(97.745, abs=2e-3)


def test_finite_difference_not_semiclassical():
    with pytest.raises(DomainError):
        sc.quantise(CFG, Method.FINITE_DIFFERENCE)


def test_half_life_decreases_with_n(wkb_levels):
    taus = [sc.wkb_half_life(CFG, s) for s in wkb_levels]
    assert all(a > b for a, b in zip(taus, taus[1:]))
    assert taus[-1] == pytest.approx(1.043, rel=1e-2)
    assert sc.wkb_half_life(CFG, wkb_levels[-1].epsilon) == taus[-1]


def test_half_life_above_barrier_raises():
    top = model.barrier_top(CFG, PotentialKind.QUANTUM)
    with pytest.raises(NotQuasiBoundError):
        sc.wkb_half_life(CFG, top.value + 1.0)


def test_wkb_wavefunction_branches_and_guard_band(wkb_levels):
    pieces, rho, psi, branch = sc.wkb_wavefunction(CFG, wkb_levels[2])
    assert set(np.unique(branch)) <= {0, 1, 2, 3}
    for r in (pieces.rho1, pieces.rho2, pieces.rho3):
        assert math.isnan(pieces(r))
    inside = (branch == 1) & np.isfinite(psi)
    nodes = np.count_nonzero(np.diff(np.sign(psi[inside])) != 0)
    assert nodes == 2


def test_wkb_wavefunction_overlaps_finite_difference(wkb_levels):
    grid = fdm.DEFAULT_GRID
    top = model.barrier_top(CFG, PotentialKind.QUANTUM)
    spec = fdm.eigensolve(fdm.build_hamiltonian(grid, CFG), below=top.value)
    qb = fdm.select_quasibound(spec, CFG)
    values = list(spec.eigenvalues)
    for s in qb.states[:5]:
        vec = spec.eigenvectors[:, values.index(s.epsilon)] / math.sqrt(grid.h)
        _, rho, psi, branch = sc.wkb_wavefunction(CFG, wkb_levels[s.n], grid.interior)
        ok = np.isfinite(psi) & (branch <= 1)
        assert abs(np.sum(psi[ok] * vec[ok])) * grid.h > 0.85


def test_node_count_every_level(wkb_levels):
    for s in wkb_levels:
        pieces, rho, psi, branch = sc.wkb_wavefunction(
            CFG, s, np.linspace(0.01, 2.0, 4001))
        inside = (branch == 1) & np.isfinite(psi)
        assert np.count_nonzero(np.diff(np.sign(psi[inside])) != 0) == s.n


@pytest.mark.parametrize("m", range(-5, 6))
def test_log_half_life_decreasing_top_levels(m):
    cfg = MonopoleConfig(100.0, m)
    levels = sc.quasibound_levels(cfg)[-5:]
    taus = [sc.wkb_half_life(cfg, s) for s in levels]
    assert all(t > 0 for t in taus)
    assert all(a > b for a, b in zip(taus, taus[1:]))


def test_classical_and_quantum_levels_within_one_spacing(wkb_levels):
    bs = sc.quantise(CFG, Method.BOHR_SOMMERFELD_CLASSICAL)
    eps = np.array([s.epsilon for s in wkb_levels])
    spacing = np.mean(np.diff(eps))
    for c, q in zip(bs, wkb_levels):
        assert abs(c.epsilon - q.epsilon) < spacing
