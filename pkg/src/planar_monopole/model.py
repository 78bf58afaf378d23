"""Dimensionless problem definition, potentials, turning points and units.

Lengths are measured in units of the monopole-plane distance D, energies in
E0 = hbar^2 / (2 m* D^2) and times in t0 = hbar / E0.  The monopole strength
enters only through ``lam``, the charge in units of twice the Dirac charge.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, NoRootsError

# CODATA 2018
HBAR = 1.054571817e-34  # J s
MU0 = 1.25663706212e-6  # N A^-2
ELEMENTARY_CHARGE = 1.602176634e-19  # C
ELECTRON_MASS = 9.1093837015e-31  # kg

DIRAC_CHARGE = 2.0 * math.pi * HBAR / (MU0 * ELEMENTARY_CHARGE)  # A m

ROOT_TOL = 1e-10
SCAN_POINTS = 4096
SCAN_MIN = 1e-4


class PotentialKind(enum.Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"
    SCATTERING_EFFECTIVE = "scattering"


@dataclass(frozen=True)
class MonopoleConfig:
    """One radial problem: monopole strength ``lam`` and angular momentum ``m``.

    ``m`` is an integer for quantum work; the classical routines accept any
    real value, which is how ``from_ratio`` builds configurations on a
    continuous M/lambda axis.
    """

    lam: float
    m: float = 0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be positive, got {self.lam!r}")
        if not math.isfinite(self.m):
            raise DomainError(f"m must be finite, got {self.m!r}")

    @classmethod
    def from_ratio(cls, m_over_lambda: float, lam: float = 1.0) -> "MonopoleConfig":
        return cls(lam=lam, m=m_over_lambda * lam)

    @property
    def ratio(self) -> float:
        return self.m / self.lam

    def require_integer_m(self) -> int:
        if float(self.m) != round(self.m):
            raise DomainError(f"quantum operations need integer m, got {self.m!r}")
        return int(round(self.m))


@dataclass(frozen=True)
class PhysicalScales:
    """SI scales derived from the distance ``d`` (m) and effective mass (kg)."""

    d: float
    m_star: float = ELECTRON_MASS
    e0: float = field(init=False)
    t0: float = field(init=False)
    q_dirac: float = field(init=False, default=DIRAC_CHARGE)

    def __post_init__(self):
        if self.d <= 0 or self.m_star <= 0:
            raise DomainError("distance and mass must be positive")
        e0 = HBAR**2 / (2.0 * self.m_star * self.d**2)
        object.__setattr__(self, "e0", e0)
        object.__setattr__(self, "t0", HBAR / e0)


class Extremum(NamedTuple):
    rho: float
    value: float
    kind: str  # "minimum" | "maximum"


@dataclass(frozen=True)
class TurningPoints:
    roots: tuple[float, ...]
    epsilon: float
    no_barrier: bool = False

    def __len__(self):
        return len(self.roots)

    def __getitem__(self, i):
        return self.roots[i]


def flux_fraction(rho):
    """1 - 1/sqrt(1 + rho^2), evaluated without cancellation at small rho."""
    rho = np.asarray(rho, dtype=float)
    q = np.sqrt(1.0 + rho * rho)
    return rho * rho / (q * (1.0 + q))


def _check_radius(rho):
    arr = np.asarray(rho, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("radius must be strictly positive")
    return arr


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def vector_potential(rho, lam: float):
    """Azimuthal vector potential a(rho) = lam * (1 - 1/sqrt(1+rho^2)) / rho."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    rho = _check_radius(rho)
    return _scalar_or_array(lam * flux_fraction(rho) / rho)


def potential(rho, config: MonopoleConfig, kind: PotentialKind = PotentialKind.QUANTUM):
    """Radial potential in units of E0 for the classical or quantum problem."""
    if kind is PotentialKind.SCATTERING_EFFECTIVE:
        raise DomainError("use scattering_potential(z, epsilon, config) for V_eff")
    rho = _check_radius(rho)
    a = config.m + config.lam * flux_fraction(rho)
    v = a * a / (rho * rho)
    if kind is PotentialKind.QUANTUM:
        v = v - 0.25 / (rho * rho)
    return _scalar_or_array(v)


def scattering_potential(z, epsilon: float, config: MonopoleConfig):
    """V_eff(z, eps) of the radial equation written in z = sqrt(eps) * rho."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    z = _check_radius(z)
    a = config.m + config.lam * flux_fraction(z / math.sqrt(epsilon))
    return _scalar_or_array((a * a - 0.25) / (z * z))


def m_over_lambda_max() -> float:
    """Largest M/lambda for which V_cl still has a well: 2 (2/3)^(3/2) - 1."""
    return 2.0 * (2.0 / 3.0) ** 1.5 - 1.0


def _extend_scan_max(config, kind, rho_max=50.0):
    ratio = config.ratio
    if -1.0 < ratio < 0.0:
        # the well sits at the zero of M + lam f, f = 1 - 1/q; the barrier lies beyond it
        q = 1.0 / (1.0 + ratio)
        rho_max = max(rho_max, 10.0 * math.sqrt(q * q - 1.0))
    # keep going outward while V is still rising at the edge of the scan
    while rho_max < 1e7:
        r = np.array([rho_max * 0.99, rho_max])
        v = potential(r, config, kind)
        if v[1] <= v[0]:
            break
        rho_max *= 10.0
    return rho_max


def potential_extrema(config: MonopoleConfig, kind: PotentialKind = PotentialKind.CLASSICAL,
                      rho_max: float | None = None) -> list[Extremum]:
    """Local extrema of V on (0, rho_max], ordered by radius."""
    if rho_max is None:
        rho_max = _extend_scan_max(config, kind)
    rho = np.geomspace(SCAN_MIN, rho_max, 8 * SCAN_POINTS)
    v = potential(rho, config, kind)
    dv = np.diff(v)
    out: list[Extremum] = []
    if kind is PotentialKind.CLASSICAL and config.m == 0:
        out.append(Extremum(0.0, 0.0, "minimum"))
    for i in range(1, len(dv)):
        if dv[i - 1] < 0 <= dv[i] or dv[i - 1] > 0 >= dv[i]:
            is_max = dv[i - 1] > 0
            sign = -1.0 if is_max else 1.0
            res = minimize_scalar(
                lambda x: sign * float(potential(x, config, kind)),
                bounds=(rho[i - 1], rho[i + 1]),
                method="bounded",
                options={"xatol": 1e-12 * rho[i]},
            )
            r0 = float(res.x)
            out.append(Extremum(r0, float(potential(r0, config, kind)),
                                "maximum" if is_max else "minimum"))
    return out


def barrier_top(config: MonopoleConfig, kind: PotentialKind = PotentialKind.QUANTUM):
    """Outermost maximum of V, or None when there is no barrier."""
    maxima = [e for e in potential_extrema(config, kind) if e.kind == "maximum"]
    return maxima[-1] if maxima else None


def well_bottom(config: MonopoleConfig, kind: PotentialKind = PotentialKind.QUANTUM):
    """Lowest minimum inside the barrier, or None when the well has vanished."""
    ext = potential_extrema(config, kind)
    top = [e for e in ext if e.kind == "maximum"]
    if not top:
        return None
    mins = [e for e in ext if e.kind == "minimum" and e.rho < top[-1].rho]
    if not mins:
        return None
    return min(mins, key=lambda e: e.value)


def bisect_root(f, lo, hi, tol=ROOT_TOL):
    """Plain bisection on a sign change of f in [lo, hi]."""
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scan_roots(f, grid, tol=ROOT_TOL):
    """All sign changes of a vectorised f on ``grid``, refined by bisection."""
    vals = f(grid)
    s = np.sign(vals)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    roots = [float(bisect_root(lambda x: float(f(x)), grid[i], grid[i + 1], tol)) for i in idx]
    exact = np.nonzero(vals == 0)[0]
    roots.extend(float(grid[i]) for i in exact)
    return sorted(roots)


def turning_points(config: MonopoleConfig, kind: PotentialKind, epsilon: float,
                   rho_scan_max: float | None = None) -> TurningPoints:
    """Radii where V(rho) = epsilon.

    A quasi-bound energy gives three roots; above the barrier top the result
    carries ``no_barrier=True``.  For M = 0 the inner turning point sits at
    the origin and only two roots are returned.
    """
    ext = potential_extrema(config, kind)
    if rho_scan_max is None:
        outer = max((e.rho for e in ext), default=0.0)
        rho_scan_max = max(50.0, 10.0 * outer)
    grid = np.geomspace(SCAN_MIN, rho_scan_max, SCAN_POINTS)
    roots = scan_roots(lambda r: potential(r, config, kind) - epsilon, grid)
    if not roots:
        raise NoRootsError(f"epsilon={epsilon} lies below the potential minimum")
    maxima = [e for e in ext if e.kind == "maximum"]
    no_barrier = not maxima or epsilon >= maxima[-1].value
    return TurningPoints(tuple(roots), float(epsilon), no_barrier)


def to_si_halflife(tau: float, scales: PhysicalScales) -> float:
    """Convert a dimensionless half-life to seconds: t = 2 tau m* D^2 / hbar."""
    if tau < 0:
        raise DomainError("half-life must be non-negative")
    return 2.0 * tau * scales.m_star * scales.d**2 / HBAR


def needle_charge(b_field: float, radius: float) -> float:
    """Magnetic charge 4 pi B r^2 / mu0 of a needle tip, in Dirac charges."""
    if b_field < 0 or radius <= 0:
        raise DomainError("field must be non-negative and radius positive")
    return 4.0 * b_field * math.pi * radius**2 / MU0 / DIRAC_CHARGE
