"""Bohr-Sommerfeld and WKB quantisation, wavefunctions and tunnelling half-lives.

Both quantisation rules solve (1/pi) * int_{rho1}^{rho2} sqrt(eps - V) = n + 1/2;
they differ in the potential (V_cl or V_q) and, here, in the quadrature used
for the action: the WKB route maps each turning point with rho = rho_t +- s^2,
the Bohr-Sommerfeld route with rho = c - h cos(theta).  Agreement between the
two is therefore a check on the quadrature as well as on the physics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NotQuasiBoundError
from .model import MonopoleConfig, PotentialKind, potential, potential_extrema

GUARD_BAND = 1e-3
LEVEL_SCAN_POINTS = 2048
ACTION_RTOL = 1e-10

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


class Method(enum.Enum):
    BOHR_SOMMERFELD_CLASSICAL = "bohr-sommerfeld-classical"
    BOHR_SOMMERFELD_QUANTUM = "bohr-sommerfeld-quantum"
    WKB = "wkb"
    FINITE_DIFFERENCE = "finite-difference"


_KIND_OF = {
    Method.BOHR_SOMMERFELD_CLASSICAL: PotentialKind.CLASSICAL,
    Method.BOHR_SOMMERFELD_QUANTUM: PotentialKind.QUANTUM,
    Method.WKB: PotentialKind.QUANTUM,
}


@dataclass(frozen=True)
class Eigenstate:
    n: int
    m: float
    epsilon: float
    method: Method
    wavefunction: np.ndarray | None = field(default=None, compare=False, repr=False)


def _composite_gl(g, lo, hi, panels):
    """Composite 64-point Gauss-Legendre of a vectorised g over [lo, hi]."""
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return float(np.dot(w, g(x)))


def endpoint_quadrature(f, a, b, panels=4):
    """Integral of f on [a, b] when f has square-root behaviour at both ends.

    Each half of the interval is mapped with rho = a + s^2 (resp. b - s^2),
    which turns sqrt(rho - a) and 1/sqrt(rho - a) into smooth integrands.
    """
    if b <= a:
        return 0.0
    c = 0.5 * (a + b)
    w = math.sqrt(c - a)
    left = _composite_gl(lambda s: f(a + s * s) * 2.0 * s, 0.0, w, panels)
    right = _composite_gl(lambda s: f(b - s * s) * 2.0 * s, 0.0, w, panels)
    return left + right


def angle_quadrature(f, a, b, panels=4):
    """Integral of f on [a, b] via rho = c - h cos(theta), smooth for sqrt ends."""
    if b <= a:
        return 0.0
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    return _composite_gl(lambda t: f(c - h * np.cos(t)) * h * np.sin(t), 0.0, math.pi, panels)


def _converged(rule, f, a, b, rtol=ACTION_RTOL, max_panels=1024):
    panels = 2
    prev = rule(f, a, b, panels)
    while panels < max_panels:
        panels *= 2
        cur = rule(f, a, b, panels)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return prev


class Well:
    """A potential well bounded by a barrier, with fast turning-point lookup.

    ``left`` is the lower end of the domain; when V stays below the energy all
    the way down to it (M = 0 classically) the inner turning point is ``left``.
    """

    def __init__(self, v: Callable, left: float, bottom: tuple[float, float],
                 top: tuple[float, float]):
        self.v = v
        self.left = left
        self.r_bottom, self.v_bottom = bottom
        self.r_top, self.v_top = top

    @classmethod
    def from_config(cls, config: MonopoleConfig, kind: PotentialKind) -> "Well":
        ext = potential_extrema(config, kind)
        maxima = [e for e in ext if e.kind == "maximum"]
        if not maxima:
            raise NotQuasiBoundError(f"no barrier for lam={config.lam}, m={config.m}")
        top = maxima[-1]
        mins = [e for e in ext if e.kind == "minimum" and e.rho < top.rho]
        if not mins:
            if kind is PotentialKind.QUANTUM and config.m == 0:
                raise DomainError(
                    "V_q for M = 0 falls to -infinity at the origin: no inner turning point")
            raise NotQuasiBoundError(f"no well for lam={config.lam}, m={config.m}")
        bottom = min(mins, key=lambda e: e.value)

        def v(r):
            return potential(r, config, kind)

        return cls(v, 0.0, (bottom.rho, bottom.value), (top.rho, top.value))

    def _v(self, r):
        if self.left == 0.0 and r <= 0.0:
            r = 1e-150
        return float(self.v(r))

    def inner(self, eps):
        if self.r_bottom <= self.left or self._v(self.left if self.left != 0.0 else 1e-12) <= eps:
            return self.left
        lo = self.left if self.left != 0.0 else self.r_bottom * 1e-12
        return brentq(lambda r: self._v(r) - eps, lo, self.r_bottom, xtol=1e-15, rtol=1e-14)

    def outer(self, eps):
        return brentq(lambda r: self._v(r) - eps, self.r_bottom, self.r_top, xtol=1e-15, rtol=1e-14)

    def exit(self, eps):
        if eps >= self.v_top:
            raise NotQuasiBoundError(f"epsilon={eps} is above the barrier top {self.v_top}")
        hi = 2.0 * self.r_top
        while self._v(hi) > eps:
            hi *= 2.0
        return brentq(lambda r: self._v(r) - eps, self.r_top, hi, xtol=1e-15, rtol=1e-14)

    def momentum(self, eps):
        return lambda r: np.sqrt(np.maximum(eps - self.v(r), 0.0))

    def kappa(self, eps):
        return lambda r: np.sqrt(np.maximum(self.v(r) - eps, 0.0))


def _action(well, eps, a, b, scheme="endpoint"):
    if b <= a:
        return 0.0
    rule = endpoint_quadrature if scheme == "endpoint" else angle_quadrature
    return _converged(rule, well.momentum(eps), a, b) / math.pi


def action_integral(config: MonopoleConfig, kind: PotentialKind, epsilon: float,
                    rho_a: float, rho_b: float, scheme: str = "endpoint",
                    v: Callable | None = None) -> float:
    """(1/pi) * integral of sqrt(epsilon - V) between two turning points.

    ``v`` overrides the monopole potential (used for oracle potentials).
    Raises :class:`DomainError` if V exceeds epsilon inside the interval.
    """
    if rho_b <= rho_a:
        return 0.0
    if v is None:
        def v(r):
            return potential(r, config, kind)
    probe = np.linspace(rho_a, rho_b, 257)[1:-1]
    if np.any(v(probe) - epsilon > 1e-9 * max(1.0, abs(epsilon))):
        raise DomainError("potential exceeds the energy inside the interval: bad bracket")
    well = Well(v, rho_a, (rho_a, 0.0), (rho_b, 0.0))
    return _action(well, epsilon, rho_a, rho_b, scheme)


def quantise_well(well: Well, scheme: str = "endpoint",
                  n_scan: int = LEVEL_SCAN_POINTS) -> list[float]:
    """Energies solving action(eps) = n + 1/2 below the barrier top."""
    span = well.v_top - well.v_bottom
    eps_grid = well.v_bottom + span * np.linspace(0.0, 1.0, n_scan + 1)[1:]
    eps_grid[-1] = well.v_top - 1e-12 * max(1.0, abs(well.v_top))

    def action(eps):
        return _action(well, eps, well.inner(eps), well.outer(eps), scheme)

    values = np.array([action(e) for e in eps_grid])
    n_top = values[-1]
    levels = []
    n = 0
    while n + 0.5 <= n_top:
        target = n + 0.5
        i = int(np.searchsorted(values, target))
        lo = well.v_bottom if i == 0 else eps_grid[i - 1]
        hi = eps_grid[i]
        while hi - lo > 1e-8 * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            if action(mid) < target:
                lo = mid
            else:
                hi = mid
        levels.append(float(0.5 * (lo + hi)))
        n += 1
    return levels


def quantise(config: MonopoleConfig, method: Method | PotentialKind = Method.WKB,
             n_scan: int = LEVEL_SCAN_POINTS) -> list[Eigenstate]:
    """Semiclassical levels n = 0, 1, ... below the barrier top.

    ``method`` picks the potential (V_cl for Bohr-Sommerfeld-classical, V_q
    otherwise); a bare :class:`PotentialKind` maps CLASSICAL to
    Bohr-Sommerfeld and QUANTUM to WKB.
    """
    if isinstance(method, PotentialKind):
        method = Method.BOHR_SOMMERFELD_CLASSICAL if method is PotentialKind.CLASSICAL else Method.WKB
    if method is Method.FINITE_DIFFERENCE:
        raise DomainError("finite-difference levels come from planar_monopole.fdm")
    config.require_integer_m()
    well = Well.from_config(config, _KIND_OF[method])
    scheme = "endpoint" if method is Method.WKB else "angle"
    return [Eigenstate(n, config.m, e, method)
            for n, e in enumerate(quantise_well(well, scheme, n_scan))]


def quasibound_levels(config: MonopoleConfig) -> list[Eigenstate]:
    """WKB levels, falling back to Bohr-Sommerfeld with V_cl for M = 0.

    V_q has no inner turning point at M = 0, where the WKB action diverges
    logarithmically at the origin.
    """
    if config.m == 0:
        return quantise(config, Method.BOHR_SOMMERFELD_CLASSICAL)
    return quantise(config, Method.WKB)


@dataclass(frozen=True)
class WkbPieces:
    """Piecewise WKB wavefunction of one level.

    Branches: 0 decaying towards the origin, 1 oscillating in the well,
    2 decaying through the barrier, 3 outgoing beyond the barrier.
    """

    n: int
    epsilon: float
    rho1: float
    rho2: float
    rho3: float
    c_n: float
    j_n: float
    well: Well = field(repr=False, compare=False)

    def _int_p(self, a, b):
        return _converged(endpoint_quadrature, self.well.momentum(self.epsilon), a, b, 1e-11)

    def _int_k(self, a, b):
        return _converged(endpoint_quadrature, self.well.kappa(self.epsilon), a, b, 1e-11)

    def branch(self, rho: float) -> int:
        if rho < self.rho1:
            return 0
        if rho < self.rho2:
            return 1
        if rho < self.rho3:
            return 2
        return 3

    def in_guard_band(self, rho: float) -> bool:
        return any(abs(rho - t) < GUARD_BAND for t in (self.rho1, self.rho2, self.rho3))

    def __call__(self, rho: float) -> float:
        if rho <= 0 or self.in_guard_band(rho):
            return math.nan
        eps = self.epsilon
        p = math.sqrt(abs(eps - float(self.well.v(rho))))
        amp = self.c_n / math.sqrt(p)
        sign = -1.0 if self.n % 2 else 1.0
        b = self.branch(rho)
        if b == 0:
            return amp * math.exp(-self._int_k(rho, self.rho1))
        if b == 1:
            return amp * math.cos(self._int_p(self.rho1, rho) - math.pi / 4)
        if b == 2:
            return sign * amp * math.exp(-self._int_k(self.rho2, rho))
        return 2.0 * sign * amp * math.exp(self.j_n) * math.cos(-self._int_p(self.rho3, rho) - math.pi / 4)


def wkb_pieces(config: MonopoleConfig, state: Eigenstate) -> WkbPieces:
    """Turning points, normalisation c_n and tunnelling exponent j_n of a level."""
    if state.method not in (Method.WKB, Method.BOHR_SOMMERFELD_QUANTUM):
        raise DomainError("WKB wavefunctions need a level of the quantum potential")
    well = Well.from_config(config, PotentialKind.QUANTUM)
    eps = state.epsilon
    r1, r2, r3 = well.inner(eps), well.outer(eps), well.exit(eps)
    p = well.momentum(eps)
    j_n = -_converged(endpoint_quadrature, well.kappa(eps), r2, r3)

    def phase(r):
        # int_{r1}^{r} p for an array of r, each with its own endpoint map
        r = np.atleast_1d(r)
        s_max = np.sqrt(r - r1)
        out = np.empty_like(r)
        for i, (ri, si) in enumerate(zip(r, s_max)):
            out[i] = _composite_gl(lambda s: p(r1 + s * s) * 2.0 * s, 0.0, si, 8) if si > 0 else 0.0
        return out

    # normalisation over the well with the cosine-map quadrature
    c, h = 0.5 * (r1 + r2), 0.5 * (r2 - r1)
    theta_nodes = np.linspace(0.0, math.pi, 33)
    total = 0.0
    for lo, hi in zip(theta_nodes[:-1], theta_nodes[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        t = mid + half * _GL_NODES
        r = c - h * np.cos(t)
        pk = np.maximum(p(r), 1e-300)
        integrand = np.cos(phase(r) - math.pi / 4) ** 2 / pk * h * np.sin(t)
        total += half * float(np.dot(_GL_WEIGHTS, integrand))
    c_n = total ** -0.5
    return WkbPieces(state.n, eps, r1, r2, r3, c_n, j_n, well)


def wkb_wavefunction(config: MonopoleConfig, state: Eigenstate, rho=None):
    """Sample the piecewise WKB wavefunction.

    Returns ``(pieces, rho, psi, branch)``; samples inside the guard band
    around a turning point are NaN.
    """
    pieces = wkb_pieces(config, state)
    if rho is None:
        rho = np.linspace(0.5 * pieces.rho1, 1.5 * pieces.rho3, 801)
    rho = np.asarray(rho, dtype=float)
    psi = np.array([pieces(r) for r in rho])
    branch = np.array([pieces.branch(r) for r in rho])
    return pieces, rho, psi, branch


def barrier_integral(config: MonopoleConfig, epsilon: float) -> float:
    """int_{rho2}^{rho3} sqrt(V_q - eps), the magnitude of the tunnelling exponent."""
    well = _lifetime_well(config)
    r2, r3 = well.outer(epsilon), well.exit(epsilon)
    return _converged(endpoint_quadrature, well.kappa(epsilon), r2, r3)


def _lifetime_well(config):
    try:
        return Well.from_config(config, PotentialKind.QUANTUM)
    except DomainError:
        # M = 0: V_q rises monotonically to the barrier; bounce from the origin
        ext = potential_extrema(config, PotentialKind.QUANTUM)
        maxima = [e for e in ext if e.kind == "maximum"]
        top = maxima[-1]

        def v(r):
            return potential(r, config, PotentialKind.QUANTUM)

        return Well(v, 0.0, (0.0, -math.inf), (top.rho, top.value))


def wkb_half_life(config: MonopoleConfig, state: Eigenstate | float) -> float:
    """Tunnelling half-life (rho2 - rho1) ln2 exp(2 int |p|) / sqrt(eps).

    Accepts a level or a bare energy.  For M = 0 the bounce starts at the
    origin.  Raises :class:`NotQuasiBoundError` above the barrier top.
    """
    eps = state.epsilon if isinstance(state, Eigenstate) else float(state)
    if eps <= 0:
        raise NotQuasiBoundError("energy must be positive")
    well = _lifetime_well(config)
    if eps >= well.v_top:
        raise NotQuasiBoundError(f"epsilon={eps} is not below the barrier top {well.v_top}")
    r1 = well.inner(eps) if well.r_bottom > 0 else 0.0
    r2, r3 = well.outer(eps), well.exit(eps)
    barrier = _converged(endpoint_quadrature, well.kappa(eps), r2, r3)
    return (r2 - r1) * math.log(2.0) * math.exp(2.0 * barrier) / math.sqrt(eps)
