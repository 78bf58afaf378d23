import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jv, jvp

from planar_monopole import scattering as sc
from planar_monopole.errors import DomainError, FitError
from planar_monopole.model import MonopoleConfig
from planar_monopole.scattering import ScatteringConfig


def _wrap(x):
    return (x + math.pi / 2) % math.pi - math.pi / 2


@pytest.mark.parametrize("m", range(0, 5))
def test_free_phase_matches_bessel_solution(m):
    # lam = 0: the regular solution is sqrt(z) J_|M|(z) = C sin(z + mu)
    z = np.array([10.0, 100.0, 1000.0])
    trace = sc.integrate_phase(ScatteringConfig(0.0, m), 1.0, z_samples=z)
    u = np.sqrt(z) * jv(m, z)
    du = jv(m, z) / (2 * np.sqrt(z)) + np.sqrt(z) * jvp(m, z)
    exact = np.arctan2(u, du) - z
    np.testing.assert_allclose(_wrap(trace.mu[1:] - exact), 0.0, atol=1e-7)


def test_free_phase_shift_vanishes():
    for m in range(-4, 5):
        ps = sc.phase_shift(ScatteringConfig(0.0, m), 1.0)
        assert abs(ps.delta) < 1e-6


@settings(max_examples=10, deadline=None)
@given(m=st.integers(1, 6), eps=st.floats(0.1, 100.0))
def test_free_phase_is_even_in_m(m, eps):
    z = np.array([50.0, 500.0])
    a = sc.integrate_phase(ScatteringConfig(0.0, m), eps, z_max=500.0, z_samples=z).mu
    b = sc.integrate_phase(ScatteringConfig(0.0, -m), eps, z_max=500.0, z_samples=z).mu
    np.testing.assert_array_equal(a, b)


def test_initial_slope():
    assert sc.mu_initial_slope(0) == 1.0
    assert sc.mu_initial_slope(2) == pytest.approx(-0.6)
    assert sc.mu_initial_slope(1) == sc.mu_initial_slope(-1) == pytest.approx(-1 / 3)
    assert sc.mu_initial_slope(-2) == sc.mu_initial_slope(2)


def test_trace_starts_at_origin():
    trace = sc.integrate_phase(ScatteringConfig(0.0, 1), 1.0, z_max=200.0)
    assert trace.z[0] == 0.0 and trace.mu[0] == 0.0
    assert trace.z[-1] == 200.0 and trace.z.size == 201


def test_argument_validation():
    cfg = ScatteringConfig(0.0, 1)
    with pytest.raises(DomainError):
        sc.integrate_phase(cfg, 0.0)
    with pytest.raises(DomainError):
        sc.integrate_phase(cfg, 1.0, step=0.1)
    with pytest.raises(DomainError):
        ScatteringConfig(-1.0, 0)
    with pytest.raises(DomainError):
        ScatteringConfig(1.0, 0.5)
    with pytest.raises(DomainError):
        sc.scan_resonances(cfg, 10.0, 5.0)


def test_monopole_config_accepted():
    a = sc.phase_shift(MonopoleConfig(100.0, 1), 500.0).delta
    b = sc.phase_shift(ScatteringConfig(100.0, 1), 500.0).delta
    assert a == b


@settings(max_examples=20, deadline=None)
@given(eps_n=st.floats(10.0, 1000.0), gamma=st.floats(1e-8, 1.0), offset=st.floats(-50.0, 50.0),
       shift=st.floats(-1.0, 1.0), scale=st.floats(0.5, 2.0))
def test_synthetic_arctan_fit_recovers_parameters(eps_n, gamma, offset, shift, scale):
    eps = eps_n + gamma * np.linspace(-10, 10, 41)
    delta = sc.arctan_model(eps, eps_n, gamma, offset)
    # seed away from the truth by up to a Gamma in position and 2x in width
    fit_n, fit_g, fit_off, res = sc.fit_arctan(eps, delta, eps_n + shift * gamma, scale * gamma)
    assert abs(fit_n - eps_n) <= 1e-6 * gamma
    assert fit_g == pytest.approx(gamma, rel=1e-6)
    assert fit_off == pytest.approx(offset, abs=1e-6)
    assert res < 1e-9


def test_bracket_estimates():
    b = sc.ResonanceBracket(1.0, 1.5, 0.0, 2.0)
    assert b.centre == 1.25 and b.gamma_estimate == 0.25
    with pytest.raises(FitError):
        sc.fit_resonance(ScatteringConfig(1.0, 0), sc.ResonanceBracket(1, 2, 0, 3, unresolvable=True))


def test_narrow_resonance_scan_and_fit():
    cfg = ScatteringConfig(100.0, 1)
    brackets, eps, delta = sc.scan_resonances(cfg, 840.0, 850.0, 64)
    assert len(brackets) == 1 and not brackets[0].unresolvable
    res = sc.fit_resonance(cfg, brackets[0])
    assert res.epsilon_n == pytest.approx(844.9168, abs=1e-3)
    assert res.gamma == pytest.approx(1.53e-6, rel=0.02)
    assert res.tau == pytest.approx(1 / (2 * res.gamma))
    assert res.residual < 1e-3


def test_broad_resonance_fit():
    res = sc.fit_broad_resonance(ScatteringConfig(100.0, 1), 923.0, 40.0)
    assert res.epsilon_n == pytest.approx(926.34, abs=0.05)
    assert res.gamma == pytest.approx(0.174, rel=0.05)


def test_narrow_jump_is_pi():
    cfg = ScatteringConfig(100.0, 1)
    brackets, eps, delta = sc.scan_resonances(cfg, 840.0, 850.0, 64)
    i = int(np.argmax(np.diff(delta)))
    assert abs(delta[i + 1] - delta[i] - math.pi) < 0.05


def test_free_problem_has_no_resonances():
    brackets, _, delta = sc.scan_resonances(ScatteringConfig(0.0, 2), 1.0, 500.0, 32)
    assert brackets == [] and np.max(np.abs(delta)) < 1e-4


@pytest.mark.slow
def test_resonance_count_matches_finite_difference():
    from planar_monopole import fdm, model
    cfg = MonopoleConfig(100.0, 1)
    top = model.barrier_top(cfg, model.PotentialKind.QUANTUM)
    brackets, _, _ = sc.scan_resonances(ScatteringConfig(100.0, 1), 1.0, top.value)
    assert abs(len(brackets) - len(fdm.quasibound_states(cfg))) <= 1
