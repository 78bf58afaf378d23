"""Classical planar motion in the monopole field.

The reduced radial problem is the separable Hamiltonian
``eps = p**2 + V_cl(rho)`` with ``rho' = 2 p`` and ``p' = -V_cl'(rho)``; the
azimuthal angle follows by quadrature of ``phi' = 2 (M + lam f(rho)) / rho**2``
where ``f`` is the enclosed-flux fraction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as k
from .errors import DomainError, IntegrationError
from .model import (
    MonopoleConfig,
    PotentialKind,
    bisect_root,
    m_over_lambda_max,
    potential,
    potential_extrema,
)

ENERGY_DRIFT_TOL = 1e-8
RHO_FLOOR = 1e-6

# Yoshida's fourth-order composition of leapfrog steps
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1
_DRIFT = np.array([_W1 / 2, (_W0 + _W1) / 2, (_W0 + _W1) / 2, _W1 / 2])
_KICK = np.array([_W1, _W0, _W1, 0.0])


class OrbitClass(enum.Enum):
    BOUND_ENCLOSING = "bound-enclosing"
    BOUND_NON_ENCLOSING = "bound-non-enclosing"
    BOUNDARY = "boundary"
    SCATTERING = "scattering"
    CIRCULAR_STABLE = "circular-stable"
    CIRCULAR_UNSTABLE = "circular-unstable"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ClassicalState:
    rho: float
    p_rho: float
    phi: float = 0.0


@dataclass(frozen=True)
class Orbit:
    """Time samples of one trajectory.

    ``samples`` has columns (t, rho, p_rho, phi).  ``classification`` is filled
    in by :func:`integrate_orbit` via :func:`classify_orbit`.
    """

    config: MonopoleConfig
    samples: np.ndarray
    energy: float
    classification: OrbitClass = OrbitClass.INDETERMINATE

    @property
    def t(self):
        return self.samples[:, 0]

    @property
    def rho(self):
        return self.samples[:, 1]

    @property
    def p_rho(self):
        return self.samples[:, 2]

    @property
    def phi(self):
        return self.samples[:, 3]

    def energies(self):
        return self.p_rho**2 + potential(self.rho, self.config, PotentialKind.CLASSICAL)

    def csv_rows(self):
        """Rows (t, rho, phi, p_rho, x, y) for figure export."""
        x = self.rho * np.cos(self.phi)
        y = self.rho * np.sin(self.phi)
        return np.column_stack([self.t, self.rho, self.phi, self.p_rho, x, y])


@njit(cache=True)
def _yoshida(rho, p, phi, lam, m, dt, n_steps, every, drift, kick, floor):
    n_out = n_steps // every + 1
    out = np.empty((n_out, 4))
    out[0, 0] = 0.0
    out[0, 1] = rho
    out[0, 2] = p
    out[0, 3] = phi
    e0 = p * p + k.v_classical(rho, lam, m)
    # unit floor: for M < 0 the well bottom sits at V = 0
    scale = max(abs(e0), 1.0)
    f_prev = k.angular_velocity(rho, lam, m)
    f_mid = 0.0
    j = 1
    for step in range(1, n_steps + 1):
        for s in range(4):
            rho += 2.0 * p * drift[s] * dt
            if rho < floor:
                return out[:j], step * dt
            if kick[s] != 0.0:
                p -= k.dv_classical(rho, lam, m) * kick[s] * dt
        f_now = k.angular_velocity(rho, lam, m)
        if step % 2 == 1:
            f_mid = f_now
        else:
            # Simpson over the last pair of steps
            phi += dt / 3.0 * (f_prev + 4.0 * f_mid + f_now)
            f_prev = f_now
        if step % every == 0:
            e = p * p + k.v_classical(rho, lam, m)
            if abs(e - e0) > 1e-8 * scale:
                return out[:j], step * dt
            out[j, 0] = step * dt
            out[j, 1] = rho
            out[j, 2] = p
            out[j, 3] = phi
            j += 1
    return out[:j], -1.0


def _well_minimum(config):
    ext = potential_extrema(config, PotentialKind.CLASSICAL)
    mins = [e for e in ext if e.kind == "minimum" and e.rho > 0]
    return mins[0] if mins else None


def _second_derivative(config, rho):
    h = 1e-4 * rho
    v = potential(np.array([rho - h, rho, rho + h]), config, PotentialKind.CLASSICAL)
    return (v[0] - 2 * v[1] + v[2]) / h**2


def default_dt(config: MonopoleConfig, initial: ClassicalState | None = None) -> float:
    """Step size T / 2000 from the stiffest small-oscillation period.

    T is the harmonic period at the well minimum; when ``initial`` is given the
    period set by the curvature at its inner turning point is used as well,
    since eccentric orbits see a much steeper wall there.
    """
    periods = []
    for e in potential_extrema(config, PotentialKind.CLASSICAL):
        if e.rho > 0:
            curv = abs(_second_derivative(config, e.rho))
            if curv > 0:
                periods.append(2.0 * math.pi / math.sqrt(2.0 * curv))
                break
    if initial is not None:
        eps = initial.p_rho**2 + float(potential(initial.rho, config, PotentialKind.CLASSICAL))
        grid = np.geomspace(max(RHO_FLOOR, 1e-4 * initial.rho), initial.rho, 2048)
        v = potential(grid, config, PotentialKind.CLASSICAL) - eps
        inner = np.nonzero(v > 0)[0]
        if len(inner):
            r_in = float(grid[inner[-1]])
            curv = abs(_second_derivative(config, r_in))
            if curv > 0:
                periods.append(2.0 * math.pi / math.sqrt(2.0 * curv))
    return min(periods) / 2000.0 if periods else 1e-3


def integrate_orbit(config: MonopoleConfig, initial: ClassicalState, t_end: float,
                    dt: float | None = None, sample_every: int = 10,
                    classify: bool = True) -> Orbit:
    """Integrate the radial motion and the azimuthal quadrature up to ``t_end``.

    Raises :class:`IntegrationError` if the energy drifts by more than 1e-8
    relative to max(|E|, 1); the failing time is attached as ``err.at``.
    """
    if initial.rho <= 0:
        raise DomainError("initial radius must be positive")
    if dt is None:
        dt = default_dt(config, initial)
    if dt <= 0:
        raise DomainError("dt must be positive")
    every = max(2, sample_every + sample_every % 2)
    n_steps = int(math.ceil(t_end / dt / every)) * every
    m0 = float(config.m)
    # M = 0 passes straight through the origin: V_cl is even in rho there, so
    # integrate a signed radius and fold it back afterwards
    floor = -math.inf if m0 == 0 else RHO_FLOOR
    samples, fail = _yoshida(float(initial.rho), float(initial.p_rho), float(initial.phi),
                             float(config.lam), m0, float(dt), n_steps, every,
                             _DRIFT, _KICK, floor)
    assert config.m == m0  # canonical angular momentum is a parameter, never state
    if m0 == 0:
        neg = samples[:, 1] < 0
        samples[neg, 1] *= -1.0
        samples[neg, 2] *= -1.0
        samples[neg, 3] += math.pi
    if fail >= 0:
        if config.m != 0 and samples[-1, 1] < 1e-3:
            raise IntegrationError("trajectory fell into the origin", at=fail)
        raise IntegrationError(f"energy drift exceeded {ENERGY_DRIFT_TOL} at t={fail:.6g}", at=fail)
    energy = initial.p_rho**2 + float(potential(initial.rho, config, PotentialKind.CLASSICAL))
    orbit = Orbit(config, samples, energy)
    if classify:
        orbit = Orbit(config, samples, energy, classify_orbit(orbit))
    return orbit


def _escape_radius(config, energy):
    ext = potential_extrema(config, PotentialKind.CLASSICAL)
    grid = np.geomspace(1e-4, max(50.0, 10 * max((e.rho for e in ext), default=1.0)), 4096)
    v = potential(grid, config, PotentialKind.CLASSICAL) - energy
    crossings = grid[1:][np.sign(v[1:]) != np.sign(v[:-1])]
    outer = max([*crossings, *(e.rho for e in ext if e.kind == "maximum")], default=1.0)
    return 2.0 * outer


def classify_orbit(orbit: Orbit) -> OrbitClass:
    """Label a trajectory by escape, circularity and azimuthal winding."""
    config = orbit.config
    rho, p = orbit.rho, orbit.p_rho
    r_esc = _escape_radius(config, orbit.energy)
    if np.any((rho > r_esc) & (p > 0)):
        return OrbitClass.SCATTERING
    spread = rho.max() - rho.min()
    if spread <= 1e-6 * rho.mean():
        curv = _second_derivative(config, float(rho.mean()))
        return OrbitClass.CIRCULAR_STABLE if curv > 0 else OrbitClass.CIRCULAR_UNSTABLE
    turns = np.count_nonzero(np.diff(np.sign(p)) != 0)
    if config.m == 0:
        # radial reflections through the origin register as sign flips too
        return OrbitClass.BOUNDARY if turns >= 3 else OrbitClass.INDETERMINATE
    if turns < 6:
        return OrbitClass.INDETERMINATE
    phidot = 2.0 * (config.m + config.lam * _flux(rho)) / rho**2
    if phidot.min() < 0 < phidot.max():
        return OrbitClass.BOUND_NON_ENCLOSING
    return OrbitClass.BOUND_ENCLOSING


def _flux(rho):
    q = np.sqrt(1.0 + rho * rho)
    return rho * rho / (q * (1.0 + q))


def circular_orbits(m_over_lambda: float) -> list[tuple[float, str]]:
    """Radii of circular orbits and their stability for a given M/lambda."""
    config = MonopoleConfig.from_ratio(m_over_lambda)
    out = []
    for e in potential_extrema(config, PotentialKind.CLASSICAL):
        if e.rho > 0 and e.value > 1e-12:
            out.append((e.rho, "stable" if e.kind == "minimum" else "unstable"))
    return out


def _well_profile(m_over_lambda: float, level: str):
    """Width and absolute energy of the V_cl/lam^2 well at the chosen level."""
    config = MonopoleConfig.from_ratio(m_over_lambda)
    ext = potential_extrema(config, PotentialKind.CLASSICAL)
    maxima = [e for e in ext if e.kind == "maximum"]
    if not maxima:
        return 0.0, 0.0
    top = maxima[-1]
    mins = [e for e in ext if e.kind == "minimum" and e.rho < top.rho]
    if not mins:
        return 0.0, 0.0
    bottom = min(mins, key=lambda e: e.value)
    frac = {"full": 1.0, "half": 0.5}[level]
    e_lev = bottom.value + frac * (top.value - bottom.value)
    if e_lev <= bottom.value:
        return 0.0, 0.0

    def f(r):
        return float(potential(r, config, PotentialKind.CLASSICAL)) - e_lev

    # left edge: the potential rises towards the origin unless M = 0
    if bottom.rho == 0.0 or f(1e-9) < 0:
        left = 0.0
    else:
        lo = bottom.rho
        while f(lo) < 0 and lo > 1e-12:
            lo *= 0.5
        left = bisect_root(f, lo, bottom.rho, 1e-12 * bottom.rho) if lo > 1e-12 else 0.0
    right = top.rho if frac == 1.0 else bisect_root(f, bottom.rho, top.rho, 1e-12 * top.rho)
    return right - left, e_lev


def harmonic_state_count(config: MonopoleConfig, level: str = "full") -> float:
    """Harmonic-oscillator estimate N = w lam sqrt(eps_w / 2) of the state count.

    ``level="full"`` measures the width ``w`` and energy ``eps_w`` of
    V_cl/lam^2 at the barrier top; ``level="half"`` at half the well depth.
    Returns 0 when there is no well.
    """
    w, e = _well_profile(config.ratio, level)
    return w * config.lam * math.sqrt(e / 2.0)


def state_count_curve(ratios, level: str = "full") -> np.ndarray:
    """N_{M/lam}/lam on an array of M/lam values (shape of the estimate)."""
    out = []
    for x in ratios:
        w, e = _well_profile(float(x), level)
        out.append(w * math.sqrt(e / 2.0))
    return np.array(out)


def total_bound_estimate(lam: float, level: str = "full", n_grid: int = 401) -> tuple[float, float]:
    """Total N_b = sum_M N_{M/lam}, as (N_b, N_b / lam^2).

    The sum over M is replaced by lam times an integral over M/lam; the well
    exists only for -1 < M/lam < (M/lam)_max.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    x = np.linspace(-1.0, m_over_lambda_max(), n_grid)[1:-1]
    curve = state_count_curve(x, level)
    coeff = float(np.trapezoid(curve, x))
    return coeff * lam**2, coeff
