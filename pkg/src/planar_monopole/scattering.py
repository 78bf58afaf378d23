"""Variable phase method: phase function, phase shifts and resonances.

With z = sqrt(eps) * rho the radial solution is written C(z) sin(z + mu(z))
and the phase obeys d(mu)/dz = -V_eff(z) sin^2(z + mu).  For lam = 0 the
solution is a Bessel function and mu(inf) = (1 - 2|M|) pi / 4 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange
from scipy.optimize import least_squares

from ._kernels import v_scattering
from .errors import DomainError, FitError, IntegrationError
from .model import MonopoleConfig

# TBB may be present but too old; workqueue is always available
numba.config.THREADING_LAYER = "workqueue"

H0 = 1e-4
MAX_STEP = 2.0 * math.pi * 1e-3
STIFF_FACTOR = 0.1
MAX_DMU = 0.5
MAX_HALVINGS = 10
Z_TAIL = (500.0, 1000.0, 2000.0)
TAIL_TOL = 0.25
SCAN_POINTS = 1024
FIT_RESIDUAL_MAX = 0.05


@dataclass(frozen=True)
class ScatteringConfig:
    """(lam, m) for the phase equation; unlike MonopoleConfig it admits lam = 0,
    the free problem whose phases are known exactly."""

    lam: float
    m: int = 0

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be non-negative, got {self.lam!r}")
        if float(self.m) != round(self.m):
            raise DomainError(f"m must be an integer, got {self.m!r}")


AnyConfig = MonopoleConfig | ScatteringConfig


def mu_initial_slope(m: float) -> float:
    """mu'(0), chosen so mu(z) ~ mu'(0) z reproduces the small-z Bessel behaviour."""
    if m >= 0:
        return -(m - 0.5) / (m + 0.5)
    return -(m + 0.5) / (m - 0.5)


@njit(cache=True)
def _rhs(z, mu, eps, lam, m):
    s = math.sin(z + mu)
    return -v_scattering(z, eps, lam, m) * s * s


@njit(cache=True)
def _rk4(z, mu, h, eps, lam, m):
    k1 = _rhs(z, mu, eps, lam, m)
    k2 = _rhs(z + 0.5 * h, mu + 0.5 * h * k1, eps, lam, m)
    k3 = _rhs(z + 0.5 * h, mu + 0.5 * h * k2, eps, lam, m)
    k4 = _rhs(z + h, mu + h * k3, eps, lam, m)
    return mu + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


@njit(cache=True)
def _integrate(eps, lam, m, mu0, z_out, step, h0):
    # returns (mu at z_out, z of failure or -1)
    out = np.empty(z_out.shape[0])
    z = h0
    mu = mu0 * h0
    k = 0
    while k < z_out.shape[0]:
        v = abs(v_scattering(z, eps, lam, m))
        h = step
        if v > 0.0:
            hv = STIFF_FACTOR / math.sqrt(v)
            if hv < h:
                h = hv
        last = False
        if z + h >= z_out[k]:
            h = z_out[k] - z
            last = True
        new = _rk4(z, mu, h, eps, lam, m)
        tries = 0
        while abs(new - mu) > MAX_DMU and tries < MAX_HALVINGS:
            h *= 0.5
            last = False
            new = _rk4(z, mu, h, eps, lam, m)
            tries += 1
        if abs(new - mu) > MAX_DMU:
            return out, z
        mu = new
        z += h
        if last:
            z = z_out[k]
            out[k] = mu
            k += 1
    return out, -1.0


@njit(cache=True, parallel=True)
def _integrate_many(eps_arr, lam, m, mu0, z_out, step, h0):
    n = eps_arr.shape[0]
    res = np.empty((n, z_out.shape[0]))
    fail = np.empty(n)
    for i in prange(n):
        r, f = _integrate(eps_arr[i], lam, m, mu0, z_out, step, h0)
        res[i] = r
        fail[i] = f
    return res, fail


@dataclass(frozen=True)
class PhaseTrace:
    z: np.ndarray
    mu: np.ndarray
    config: AnyConfig
    epsilon: float
    z_max: float
    step: float


def _check_step(step, z_max):
    if step > MAX_STEP * (1 + 1e-12):
        raise DomainError(f"step must be at most 2*pi*1e-3, got {step}")
    if z_max < 100:
        raise DomainError("z_max must be at least 100")


def integrate_phase(config: AnyConfig, epsilon: float, z_max: float = 2000.0,
                    step: float = MAX_STEP, z_samples=None) -> PhaseTrace:
    """Integrate the phase equation from z = h0 to ``z_max``.

    ``z_samples`` selects the output points (default: 1, 2, ..., z_max).
    The step shrinks to 0.1 / sqrt(|V_eff|) where the potential is stiff.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    _check_step(step, z_max)
    if z_samples is None:
        z_samples = np.arange(1.0, math.floor(z_max) + 1.0)
        if z_samples[-1] != z_max:
            z_samples = np.append(z_samples, z_max)
    z_samples = np.asarray(z_samples, dtype=float)
    if np.any(np.diff(z_samples) <= 0) or z_samples[0] <= H0:
        raise DomainError("z samples must increase and lie beyond h0")
    mu, fail = _integrate(float(epsilon), float(config.lam), float(config.m),
                          mu_initial_slope(config.m), z_samples, float(step), H0)
    if fail >= 0:
        raise IntegrationError(f"phase step rejected ten times at z={fail:.6g}", at=fail)
    z = np.concatenate([[0.0], z_samples])
    return PhaseTrace(z, np.concatenate([[0.0], mu]), config, float(epsilon), float(z_max), float(step))


@dataclass(frozen=True)
class PhaseShift:
    delta: float
    mu_tail: tuple[float, ...]
    error: float


def _phase_shifts(config, eps_arr, step=MAX_STEP, tail_tol=TAIL_TOL):
    eps_arr = np.ascontiguousarray(eps_arr, dtype=float)
    if np.any(eps_arr <= 0):
        raise DomainError("epsilon must be positive")
    z_out = np.array(Z_TAIL)
    mu, fail = _integrate_many(eps_arr, float(config.lam), float(config.m),
                               mu_initial_slope(config.m), z_out, float(step), H0)
    bad = np.nonzero(fail >= 0)[0]
    if bad.size:
        i = int(bad[0])
        raise IntegrationError(f"phase step rejected at z={fail[i]:.6g} for epsilon={eps_arr[i]}",
                               at=float(fail[i]))
    # Richardson on the 1/z tail, error estimate from the next pair down
    r_hi = 2.0 * mu[:, 2] - mu[:, 1]
    r_lo = 2.0 * mu[:, 1] - mu[:, 0]
    err = np.abs(r_hi - r_lo) / 3.0
    worst = int(np.argmax(err))
    if err[worst] > tail_tol:
        raise IntegrationError(
            f"phase tail not converged at epsilon={eps_arr[worst]} (estimate {err[worst]:.3g} rad); "
            "integrate to a larger z_max", at=Z_TAIL[-1])
    delta = r_hi + (abs(config.m) - 0.5) * math.pi / 2.0
    return delta, mu, err


def phase_shift(config: AnyConfig, epsilon: float, step: float = MAX_STEP) -> PhaseShift:
    """delta_l(eps) = mu(inf) + (|M| - 1/2) pi/2, with mu(inf) extrapolated from z = 1000, 2000."""
    delta, mu, err = _phase_shifts(config, [epsilon], step)
    return PhaseShift(float(delta[0]), tuple(float(x) for x in mu[0]), float(err[0]))


def phase_shifts(config: AnyConfig, eps_values, step: float = MAX_STEP) -> np.ndarray:
    """Vectorised delta_l over an array of energies."""
    return _phase_shifts(config, eps_values, step)[0]


@dataclass(frozen=True)
class ResonanceBracket:
    lo: float
    hi: float
    delta_lo: float
    delta_hi: float
    unresolvable: bool = False

    @property
    def centre(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def gamma_estimate(self) -> float:
        # slope of arctan at its centre is 1/Gamma
        jump = self.delta_hi - self.delta_lo
        return (self.hi - self.lo) / jump if jump > 0 else math.inf


def _narrow(config, lo, hi, d_lo, d_hi, step):
    target = 0.5 * (d_lo + d_hi)
    width = 1e-10
    while True:
        while hi - lo > width * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            d_mid = float(phase_shifts(config, [mid], step)[0])
            if d_mid < target:
                lo, d_lo = mid, d_mid
            else:
                hi, d_hi = mid, d_mid
        if d_hi - d_lo <= math.pi / 2:
            return ResonanceBracket(lo, hi, d_lo, d_hi)
        if width <= 1e-12:
            return ResonanceBracket(lo, hi, d_lo, d_hi, unresolvable=True)
        width = 1e-12


def scan_resonances(config: AnyConfig, eps_lo: float, eps_hi: float,
                    n_points: int = SCAN_POINTS, step: float = MAX_STEP):
    """Brackets of phase jumps larger than pi/2 between neighbouring scan points.

    Returns ``(brackets, eps, delta)`` where the last two are the coarse scan.
    """
    if not (0 < eps_lo < eps_hi):
        raise DomainError("need 0 < eps_lo < eps_hi")
    eps = np.linspace(eps_lo, eps_hi, n_points)
    delta = phase_shifts(config, eps, step)
    brackets = []
    for i in np.nonzero(np.diff(delta) > math.pi / 2)[0]:
        brackets.append(_narrow(config, float(eps[i]), float(eps[i + 1]),
                                float(delta[i]), float(delta[i + 1]), step))
    return brackets, eps, delta


@dataclass(frozen=True)
class Resonance:
    epsilon_n: float
    gamma: float
    delta_offset: float
    tau: float
    residual: float
    samples: tuple[np.ndarray, np.ndarray] | None = None


def arctan_model(eps, epsilon_n, gamma, delta_offset):
    return delta_offset + np.arctan((np.asarray(eps) - epsilon_n) / gamma)


def fit_arctan(eps, delta, centre, gamma_est) -> tuple[float, float, float, float]:
    """Least-squares arctan fit in scaled variables; returns (eps_n, Gamma, offset, max residual)."""
    eps = np.asarray(eps, dtype=float)
    delta = np.asarray(delta, dtype=float)
    x = (eps - centre) / gamma_est
    d0 = float(np.interp(0.0, x, delta))

    def resid(p):
        return p[2] + np.arctan((x - p[0]) / p[1]) - delta

    sol = least_squares(resid, [0.0, 1.0, d0], bounds=([-np.inf, 1e-6, -np.inf], np.inf),
                        x_scale=[1.0, 1.0, 1.0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    x0, g, off = sol.x
    return centre + x0 * gamma_est, g * gamma_est, float(off), float(np.max(np.abs(sol.fun)))


def fit_resonance(config: AnyConfig, bracket: ResonanceBracket, n_samples: int = 41,
                  span: float = 10.0, step: float = MAX_STEP) -> Resonance:
    """Fit delta_offset + arctan((eps - eps_n) / Gamma) to samples within +-span*Gamma_est."""
    if bracket.unresolvable:
        raise FitError("resonance narrower than the precision of the energy grid")
    n_samples = max(21, n_samples)
    centre, g_est = bracket.centre, bracket.gamma_estimate
    eps = centre + g_est * np.linspace(-span, span, n_samples)
    eps = eps[eps > 0]
    delta = phase_shifts(config, eps, step)
    eps_n, gamma, off, res = fit_arctan(eps, delta, centre, g_est)
    if res > FIT_RESIDUAL_MAX:
        raise FitError(f"arctan fit residual {res:.3g} rad exceeds {FIT_RESIDUAL_MAX} "
                       f"(eps_n={eps_n:.8g}, Gamma={gamma:.3g})", residual=res)
    return Resonance(float(eps_n), float(gamma), off, 1.0 / (2.0 * gamma), res, (eps, delta))


def fit_broad_resonance(config: AnyConfig, eps_guess: float, half_width: float,
                        n_scan: int = 81, n_samples: int = 41, span: float = 5.0,
                        step: float = MAX_STEP) -> Resonance:
    """Fit a resonance too wide for the jump detector of :func:`scan_resonances`.

    The steepest point of delta over ``eps_guess +- half_width`` seeds the
    centre and Gamma; the fit then adds a linear background to the arctan,
    since over +-span*Gamma the background phase is no longer constant.
    """
    lo = max(eps_guess - half_width, 1e-9)
    eps = np.linspace(lo, eps_guess + half_width, n_scan)
    delta = phase_shifts(config, eps, step)
    slope = np.diff(delta) / np.diff(eps)
    i = int(np.argmax(slope))
    if slope[i] <= 0:
        raise FitError("no rising phase step in the window")
    centre = 0.5 * (eps[i] + eps[i + 1])
    g_est = 1.0 / slope[i]
    w = min(span * g_est, half_width)
    eps = np.linspace(max(centre - w, 1e-9), centre + w, max(21, n_samples))
    delta = phase_shifts(config, eps, step)
    x = (eps - centre) / g_est

    def resid(p):
        return p[2] + p[3] * x + np.arctan((x - p[0]) / p[1]) - delta

    d0 = float(np.interp(0.0, x, delta))
    sol = least_squares(resid, [0.0, 1.0, d0, 0.0], bounds=([-np.inf, 1e-6, -np.inf, -np.inf], np.inf),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    x0, g, off, _ = sol.x
    res = float(np.max(np.abs(sol.fun)))
    eps_n, gamma = centre + x0 * g_est, g * g_est
    if res > FIT_RESIDUAL_MAX:
        raise FitError(f"arctan fit residual {res:.3g} rad exceeds {FIT_RESIDUAL_MAX} "
                       f"(eps_n={eps_n:.8g}, Gamma={gamma:.3g})", residual=res)
    return Resonance(float(eps_n), float(gamma), float(off), 1.0 / (2.0 * gamma), res, (eps, delta))
