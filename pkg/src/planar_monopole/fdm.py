"""Finite-difference radial Hamiltonian, quasi-bound states and decay by time evolution.

The radial equation -psi'' + V_q psi = eps psi is discretised with the
three-point Laplacian on a uniform grid with Dirichlet ends.  Quasi-bound
states are eigenvectors that keep most of their probability inside the
barrier peak.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import tridiag
from .errors import DomainError, LifetimeTooLongError, NotQuasiBoundError
from .model import MonopoleConfig, PotentialKind, barrier_top, potential
from .semiclassical import Eigenstate, Method

WEIGHT_THRESHOLD = 0.5
SURVIVAL_SAMPLES = 200
COMPLETENESS_MIN = 0.999
COMPLETENESS_TARGET = 1.0 - 1e-6
_CHUNK = 400


@dataclass(frozen=True)
class RadialGrid:
    a: float
    b: float
    n_points: int

    def __post_init__(self):
        if not (0 <= self.a < self.b) or self.n_points < 3:
            raise DomainError(f"invalid grid {self}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n_points - 1)

    @property
    def interior(self) -> np.ndarray:
        return self.a + self.h * np.arange(1, self.n_points - 1)


DEFAULT_GRID = RadialGrid(0.0, 20.0, 4000)
SURVIVAL_GRID = RadialGrid(0.0, 160.0, 10_000)


@dataclass(frozen=True)
class Tridiagonal:
    diag: np.ndarray
    off: np.ndarray
    grid: RadialGrid

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def count_below(self, x: float) -> int:
        return tridiag.count_below(self.diag, self.off, x)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, unit 2-norm
    grid: RadialGrid
    residuals: np.ndarray
    converged: np.ndarray


@dataclass(frozen=True)
class QuasiBoundSet:
    states: list[Eigenstate]
    barrier_radius: float
    barrier_height: float
    well_weight: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.states)


def build_hamiltonian(grid: RadialGrid, config: MonopoleConfig | None = None,
                      v: Callable | None = None) -> Tridiagonal:
    """Diagonal 2/h^2 + V(rho_i) and off-diagonal -1/h^2 on interior nodes.

    ``v`` replaces V_q (used for oracle and modified potentials).
    """
    rho = grid.interior
    if v is None:
        if config is None:
            raise DomainError("need a config or a potential")
        vals = potential(rho, config, PotentialKind.QUANTUM)
    else:
        vals = np.asarray(v(rho), dtype=float)
    h2 = grid.h**2
    return Tridiagonal(2.0 / h2 + vals, np.full(rho.size - 1, -1.0 / h2), grid)


def eigensolve(op: Tridiagonal, k: int | None = None, below: float | None = None) -> Spectrum:
    """All eigenpairs, the lowest ``k``, or all those below ``below``."""
    n = op.diag.size
    k1 = n
    if k is not None:
        k1 = min(k1, k)
    if below is not None:
        k1 = min(k1, op.count_below(below))
    res = tridiag.eigenpairs(op.diag, op.off, 0, k1)
    if not res.converged.all():
        bad = np.nonzero(~res.converged)[0]
        warnings.warn(f"inverse iteration did not converge for states {bad.tolist()}, "
                      f"max residual {res.residuals.max():.3g}", RuntimeWarning, stacklevel=2)
    return Spectrum(res.values, res.vectors, op.grid, res.residuals, res.converged)


def well_weights(spectrum: Spectrum, rho_peak: float) -> np.ndarray:
    inside = spectrum.grid.interior < rho_peak
    return np.sum(spectrum.eigenvectors[inside] ** 2, axis=0)


def select_quasibound(spectrum: Spectrum, config: MonopoleConfig,
                      threshold: float = WEIGHT_THRESHOLD) -> QuasiBoundSet:
    """Eigenstates below the barrier top with at least ``threshold`` weight inside it."""
    top = barrier_top(config, PotentialKind.QUANTUM)
    if top is None:
        return QuasiBoundSet([], math.nan, math.nan, [])
    weights = well_weights(spectrum, top.rho)
    states, kept = [], []
    for eps, w in zip(spectrum.eigenvalues, weights):
        if eps < top.value and w >= threshold:
            states.append(Eigenstate(len(states), config.m, float(eps), Method.FINITE_DIFFERENCE))
            kept.append(float(w))
    return QuasiBoundSet(states, top.rho, top.value, kept)


def quasibound_states(config: MonopoleConfig, grid: RadialGrid = DEFAULT_GRID,
                      threshold: float = WEIGHT_THRESHOLD) -> QuasiBoundSet:
    """Solve only up to the barrier top and keep the well-localised states."""
    config.require_integer_m()
    top = barrier_top(config, PotentialKind.QUANTUM)
    if top is None:
        return QuasiBoundSet([], math.nan, math.nan, [])
    spec = eigensolve(build_hamiltonian(grid, config), below=top.value)
    return select_quasibound(spec, config, threshold)


def count_map(lam: float, m_range: Sequence[int], grid: RadialGrid = DEFAULT_GRID,
              threshold: float = WEIGHT_THRESHOLD) -> dict[int, int]:
    """Number of quasi-bound states for each angular momentum."""
    return {int(m): len(quasibound_states(MonopoleConfig(lam, int(m)), grid, threshold))
            for m in m_range}


def m_range_for(lam: float) -> range:
    # the classical well exists only for -1 < M/lam < 0.0887; pad both ends
    return range(-int(math.ceil(1.2 * lam)) - 2, int(math.ceil(0.1 * lam)) + 3)


def total_quasibound(lam: float, grid: RadialGrid = DEFAULT_GRID,
                     threshold: float = WEIGHT_THRESHOLD):
    """Total N_bq summed over M; returns (N_bq, N_bq / lam^2, per-M counts)."""
    counts = count_map(lam, m_range_for(lam), grid, threshold)
    total = sum(counts.values())
    return total, total / lam**2, {m: c for m, c in counts.items() if c}


def min_lambda(m: int, grid: RadialGrid = DEFAULT_GRID, threshold: float = WEIGHT_THRESHOLD,
               lam_start: float = 1.0, lam_stop: float = 80.0, step: float = 0.5,
               tol: float = 0.05) -> float:
    """Smallest lambda with at least one quasi-bound state at this M.

    A coarse upward scan finds the first lambda with a state, then bisection
    on the predicate narrows the bracket to ``tol``.
    """
    def has_state(lam):
        return len(quasibound_states(MonopoleConfig(lam, m), grid, threshold)) >= 1

    prev = lam_start
    lam = lam_start
    while lam <= lam_stop:
        if has_state(lam):
            break
        prev = lam
        lam += step
    else:
        raise NotQuasiBoundError(f"no quasi-bound state for m={m} up to lambda={lam_stop}")
    if lam == lam_start:
        return lam
    lo, hi = prev, lam
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if has_state(mid):
            hi = mid
        else:
            lo = mid
    return hi


def modified_potential(config: MonopoleConfig):
    """V_q flattened at its barrier-peak value beyond the peak.

    Returns ``(v_mod, rho_peak, v_peak)``.
    """
    top = barrier_top(config, PotentialKind.QUANTUM)
    if top is None:
        raise NotQuasiBoundError(f"no barrier for lam={config.lam}, m={config.m}")
    rho_peak, v_peak = top.rho, top.value

    def v_mod(rho):
        rho = np.asarray(rho, dtype=float)
        out = np.full(rho.shape, v_peak)
        inside = rho <= rho_peak
        out[inside] = potential(rho[inside], config, PotentialKind.QUANTUM)
        return out if out.ndim else float(out)

    return v_mod, rho_peak, v_peak


@dataclass(frozen=True)
class SurvivalResult:
    times: np.ndarray
    probability: np.ndarray
    completeness: float
    epsilon_n: float
    rho_peak: float
    echo_time: float
    n_modes: int
    warning: str | None = None


def _modified_state(config, n, grid):
    v_mod, rho_peak, v_peak = modified_potential(config)
    spec = eigensolve(build_hamiltonian(grid, v=v_mod), k=n + 1)
    if spec.eigenvalues.size <= n or spec.eigenvalues[n] >= v_peak:
        raise NotQuasiBoundError(f"state n={n} is not bound in the modified potential")
    return spec.eigenvectors[:, n], float(spec.eigenvalues[n]), rho_peak


def echo_time(grid: RadialGrid, rho_peak: float, epsilon: float) -> float:
    """Time before the outgoing wave returns from the box edge."""
    return (grid.b - rho_peak) / math.sqrt(epsilon)


def survival_probability(config: MonopoleConfig, n: int, grid: RadialGrid = SURVIVAL_GRID,
                         times=None, samples: int = SURVIVAL_SAMPLES) -> SurvivalResult:
    """Probability inside the barrier peak after releasing the n-th modified-potential state.

    The state is expanded in eigenpairs of the original V_q, added in chunks
    of increasing energy until the expansion is complete to 1e-6 or the
    spectrum runs out; a completeness below 0.999 is reported as a warning.
    """
    config.require_integer_m()
    zeta, eps_n, rho_peak = _modified_state(config, n, grid)
    t_echo = echo_time(grid, rho_peak, eps_n)
    if times is None:
        times = np.linspace(0.0, t_echo, samples)
    times = np.asarray(times, dtype=float)

    op = build_hamiltonian(grid, config)
    inside = grid.interior < rho_peak
    dim = op.diag.size
    coeffs, energies, parts = [], [], []
    total = 0.0
    k0 = 0
    while k0 < dim and total < COMPLETENESS_TARGET:
        k1 = min(dim, k0 + _CHUNK)
        res = tridiag.eigenpairs(op.diag, op.off, k0, k1)
        c = res.vectors.T @ zeta
        coeffs.append(c)
        energies.append(res.values)
        parts.append(res.vectors[inside])
        total += float(np.sum(c * c))
        k0 = k1
    c = np.concatenate(coeffs)
    e = np.concatenate(energies) - eps_n
    psi_in = np.concatenate(parts, axis=1)

    phases = np.exp(-1j * np.outer(e, times))  # modes x times
    amp = psi_in @ (c[:, None] * phases)  # well nodes x times
    prob = np.sum(np.abs(amp) ** 2, axis=0)

    warning = None
    if total < COMPLETENESS_MIN:
        warning = f"expansion completeness {total:.6f} below {COMPLETENESS_MIN}: grid too small"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return SurvivalResult(times, prob, total, eps_n, rho_peak, t_echo, c.size, warning)


@dataclass(frozen=True)
class FdLifetime:
    rate: float
    intercept: float
    tau: float
    tau_crossing: float | None
    survival: SurvivalResult


def fd_half_life(config: MonopoleConfig, n: int, grid: RadialGrid = SURVIVAL_GRID,
                 survival: SurvivalResult | None = None) -> FdLifetime:
    """Half-life from a straight-line fit of ln P(t') over the echo window."""
    s = survival if survival is not None else survival_probability(config, n, grid)
    keep = (s.times <= s.echo_time) & (s.probability > 0)
    t, p = s.times[keep], s.probability[keep]
    slope, intercept = np.polyfit(t, np.log(p), 1)
    rate = -float(slope)
    below = np.nonzero(p <= 0.5)[0]
    crossing = None
    if below.size:
        i = int(below[0])
        if i == 0:
            crossing = float(t[0])
        else:
            # linear interpolation of P between the bracketing samples
            t0, t1, p0, p1 = t[i - 1], t[i], p[i - 1], p[i]
            crossing = float(t0 + (p0 - 0.5) * (t1 - t0) / (p0 - p1))
    if crossing is None and rate < 1e-12:
        raise LifetimeTooLongError(
            f"P stays above 1/2 and the fitted rate {rate:.3g} is below 1e-12: "
            "lifetime too long for this grid")
    tau = math.log(2.0) / rate if rate > 0 else math.inf
    return FdLifetime(rate, float(intercept), tau, crossing, s)
