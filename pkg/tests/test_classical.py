import math

import numpy as np
import pytest

from planar_monopole import classical, model
from planar_monopole.classical import ClassicalState, OrbitClass
from planar_monopole.errors import DomainError
from planar_monopole.model import MonopoleConfig, PotentialKind


def _well_start(cfg, p):
    b = model.well_bottom(cfg, PotentialKind.CLASSICAL)
    return ClassicalState(b.rho, p)


@pytest.mark.parametrize("m", [-1, 1])
def test_energy_drift_below_1e_8(m):
    cfg = MonopoleConfig(100.0, m)
    orbit = classical.integrate_orbit(cfg, _well_start(cfg, 15.0), 0.5)
    drift = np.max(np.abs(orbit.energies() - orbit.energy)) / orbit.energy
    assert drift < 1e-8


def test_integrator_is_fourth_order():
    cfg = MonopoleConfig(100.0, -1)
    start = _well_start(cfg, 10.0)
    dt = classical.default_dt(cfg, start)
    errs = []
    for k in (2, 4):
        o = classical.integrate_orbit(cfg, start, 0.02, dt=k * dt, sample_every=2, classify=False)
        errs.append(np.max(np.abs(o.energies() - o.energy)))
    assert 10 < errs[1] / errs[0] < 24


def test_orbit_classes():
    bound = MonopoleConfig(100.0, 1)
    assert classical.integrate_orbit(bound, _well_start(bound, 0.0), 0.05).classification \
        is OrbitClass.CIRCULAR_STABLE
    assert classical.integrate_orbit(bound, _well_start(bound, 15.0), 0.25).classification \
        is OrbitClass.BOUND_ENCLOSING
    neg = MonopoleConfig(100.0, -1)
    assert classical.integrate_orbit(neg, _well_start(neg, 15.0), 0.25).classification \
        is OrbitClass.BOUND_NON_ENCLOSING
    r3 = model.turning_points(bound, PotentialKind.CLASSICAL, 400.0)[2]
    out = classical.integrate_orbit(bound, ClassicalState(r3, 0.0), 0.25)
    assert out.classification is OrbitClass.SCATTERING
    assert out.rho[-1] > 2 * r3


def test_m_zero_orbit_passes_through_origin():
    cfg = MonopoleConfig(100.0, 0)
    r2 = model.turning_points(cfg, PotentialKind.CLASSICAL, 400.0)[0]
    start = ClassicalState(0.5 * r2, math.sqrt(400.0 - model.potential(0.5 * r2, cfg, PotentialKind.CLASSICAL)))
    orbit = classical.integrate_orbit(cfg, start, 0.25)
    assert orbit.classification is OrbitClass.BOUNDARY
    assert orbit.rho.min() >= 0 and orbit.rho.min() < 0.05 * r2


def test_orbit_rejects_bad_start():
    with pytest.raises(DomainError):
        classical.integrate_orbit(MonopoleConfig(1.0, 1), ClassicalState(0.0, 1.0), 1.0)


def test_csv_rows_columns():
    cfg = MonopoleConfig(100.0, 1)
    orbit = classical.integrate_orbit(cfg, _well_start(cfg, 5.0), 0.01)
    rows = orbit.csv_rows()
    assert rows.shape[1] == 6
    np.testing.assert_allclose(np.hypot(rows[:, 4], rows[:, 5]), rows[:, 1], rtol=1e-12)


def test_circular_orbit_count_by_sign_of_ratio():
    assert [s for _, s in classical.circular_orbits(0.05)] == ["stable", "unstable"]
    assert [s for _, s in classical.circular_orbits(-0.5)] == ["unstable"]


def test_harmonic_count_vanishes_without_well():
    assert classical.harmonic_state_count(MonopoleConfig.from_ratio(0.2, 100.0)) == 0.0
    assert classical.harmonic_state_count(MonopoleConfig.from_ratio(-0.2, 100.0)) > 0.0


def test_harmonic_count_scales_linearly_with_lambda():
    a = classical.harmonic_state_count(MonopoleConfig.from_ratio(-0.3, 50.0))
    b = classical.harmonic_state_count(MonopoleConfig.from_ratio(-0.3, 100.0))
    assert b == pytest.approx(2 * a, rel=1e-9)


def test_total_bound_estimate_coefficient():
    n_b, coeff = classical.total_bound_estimate(100.0)
    assert coeff == pytest.approx(0.13, abs=0.013)
    assert n_b == pytest.approx(coeff * 1e4)


def test_circulation_independent_of_sign_of_m():
    signs = []
    for ratio in (-0.01, 0.01):
        cfg = MonopoleConfig.from_ratio(ratio, 100.0)
        orbit = classical.integrate_orbit(cfg, _well_start(cfg, 15.0), 0.25)
        signs.append(np.sign(orbit.phi[-1] - orbit.phi[0]))
    assert signs[0] == signs[1] != 0


def test_bound_orbit_respects_turning_points():
    cfg = MonopoleConfig(100.0, 1)
    start = _well_start(cfg, 15.0)
    orbit = classical.integrate_orbit(cfg, start, 0.25, sample_every=2)
    tp = model.turning_points(cfg, PotentialKind.CLASSICAL, orbit.energy)
    # extremes of sampled rho approach the turning points from inside
    assert tp[0] - 1e-6 <= orbit.rho.min() < tp[0] + 1e-3
    assert tp[1] - 1e-3 < orbit.rho.max() <= tp[1] + 1e-6


def test_circular_orbit_stays_circular_for_many_periods():
    cfg = MonopoleConfig(100.0, 1)
    b = model.well_bottom(cfg, PotentialKind.CLASSICAL)
    curv = classical._second_derivative(cfg, b.rho)
    period = 2 * math.pi / math.sqrt(2 * curv)
    orbit = classical.integrate_orbit(cfg, ClassicalState(b.rho, 0.0), 1000 * period)
    assert np.max(np.abs(orbit.rho - b.rho)) < 1e-8


def test_no_circular_orbits_beyond_ratio_max():
    assert classical.circular_orbits(model.m_over_lambda_max() + 0.01) == []


def test_harmonic_count_vanishes_continuously_at_ratio_max():
    x = model.m_over_lambda_max()
    counts = [classical.harmonic_state_count(MonopoleConfig.from_ratio(x - d, 100.0))
              for d in (1e-2, 1e-4, 1e-6)]
    assert counts[0] > counts[1] > counts[2] and counts[2] < 0.2
