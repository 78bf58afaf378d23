"""Compiled scalar kernels shared by the potential, orbit and phase code.

Everything here is a plain function of floats so numba can inline it into
the hot loops of the orbit and variable-phase integrators.
"""

import math

from numba import njit


@njit(cache=True)
def flux_fraction(rho):
    # 1 - 1/sqrt(1+rho^2) without the cancellation near rho = 0
    q = math.sqrt(1.0 + rho * rho)
    return rho * rho / (q * (1.0 + q))


@njit(cache=True)
def flux_fraction_deriv(rho):
    q = math.sqrt(1.0 + rho * rho)
    return rho / (q * q * q)


@njit(cache=True)
def v_classical(rho, lam, m):
    a = m + lam * flux_fraction(rho)
    return a * a / (rho * rho)


@njit(cache=True)
def dv_classical(rho, lam, m):
    a = m + lam * flux_fraction(rho)
    da = lam * flux_fraction_deriv(rho)
    return 2.0 * a * da / (rho * rho) - 2.0 * a * a / (rho * rho * rho)


@njit(cache=True)
def angular_velocity(rho, lam, m):
    # d(phi)/dt = d(epsilon)/dM in units where epsilon = p^2 + V_cl
    return 2.0 * (m + lam * flux_fraction(rho)) / (rho * rho)


@njit(cache=True)
def v_scattering(z, eps, lam, m):
    a = m + lam * flux_fraction(z / math.sqrt(eps))
    return (a * a - 0.25) / (z * z)
