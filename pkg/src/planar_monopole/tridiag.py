"""Symmetric tridiagonal eigensolver: Sturm bisection plus inverse iteration.

The matrix is given by its diagonal ``d`` (length n) and off-diagonal ``e``
(length n - 1).  Eigenvalues are located independently by bisection on the
Sturm count, so any index range can be computed without the rest; vectors
come from inverse iteration with a pivoted tridiagonal LU factorisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

# TBB may be present but too old; workqueue is always available
numba.config.THREADING_LAYER = "workqueue"

EPS = np.finfo(float).eps
MAX_SWEEPS = 50
CLUSTER_GAP = 1e-9


@njit(cache=True)
def sturm_count(d, e2, x, pivmin):
    """Number of eigenvalues strictly below x."""
    count = 0
    q = d[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0:
        count += 1
    for i in range(1, d.shape[0]):
        q = d[i] - x - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0:
            count += 1
    return count


@njit(cache=True)
def gershgorin(d, e):
    n = d.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(e[i - 1])
        if i < n - 1:
            r += abs(e[i])
        lo = min(lo, d[i] - r)
        hi = max(hi, d[i] + r)
    return lo, hi


@njit(cache=True, parallel=True)
def _bisect_range(d, e, k0, k1):
    e2 = e * e
    lo0, hi0 = gershgorin(d, e)
    norm = max(abs(lo0), abs(hi0))
    pivmin = max(1e-300, EPS * EPS * max(1.0, np.max(e2) if e2.shape[0] else 1.0))
    lo0 -= 2.0 * EPS * norm + 1e-300
    hi0 += 2.0 * EPS * norm + 1e-300
    out = np.empty(k1 - k0)
    for j in prange(k1 - k0):
        k = k0 + j
        lo, hi = lo0, hi0
        while hi - lo > 2.0 * EPS * max(abs(lo), abs(hi)) + EPS * norm:
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if sturm_count(d, e2, mid, pivmin) <= k:
                lo = mid
            else:
                hi = mid
        out[j] = 0.5 * (lo + hi)
    return out


@njit(cache=True)
def _lu(d, e, shift, tiny):
    # pivoted LU of T - shift*I, LAPACK dgttrf layout
    n = d.shape[0]
    dd = d - shift
    du = e.copy()
    dl = e.copy()
    du2 = np.zeros(max(n - 2, 0))
    piv = np.zeros(n, dtype=np.bool_)
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if dd[i] == 0.0:
                dd[i] = tiny
            fact = dl[i] / dd[i]
            dl[i] = fact
            dd[i + 1] -= fact * du[i]
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = dd[i + 1]
            dd[i + 1] = temp - fact * dd[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            piv[i] = True
    for i in range(n):
        if abs(dd[i]) < tiny:
            dd[i] = tiny if dd[i] >= 0 else -tiny
    return dd, du, dl, du2, piv


@njit(cache=True)
def _lu_solve(dd, du, dl, du2, piv, b):
    n = dd.shape[0]
    for i in range(n - 1):
        if not piv[i]:
            b[i + 1] -= dl[i] * b[i]
        else:
            temp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = temp - dl[i] * b[i]
    b[n - 1] /= dd[n - 1]
    if n > 1:
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i]


@njit(cache=True)
def _residual(d, e, lam, x):
    n = d.shape[0]
    s = 0.0
    for i in range(n):
        r = (d[i] - lam) * x[i]
        if i > 0:
            r += e[i - 1] * x[i - 1]
        if i < n - 1:
            r += e[i] * x[i + 1]
        s += r * r
    return math.sqrt(s)


@njit(cache=True)
def _inverse_iteration(d, e, values, norm, cluster_gap):
    n = d.shape[0]
    k = values.shape[0]
    vecs = np.empty((k, n))
    resid = np.empty(k)
    sweeps = np.empty(k, dtype=np.int64)
    tiny = EPS * max(norm, 1e-300)
    tol = 1e-10 * max(1.0, norm)
    start = 0
    for j in range(k):
        if j == 0 or values[j] - values[j - 1] > cluster_gap * max(norm, 1.0):
            start = j
        lam = values[j]
        dd, du, dl, du2, piv = _lu(d, e, lam, tiny)
        x = np.empty(n)
        for i in range(n):
            x[i] = 1.0 + 0.5 * math.sin(0.7 * i + 0.3 * j)
        x /= np.sqrt(np.sum(x * x))
        r = np.inf
        it = 0
        for it in range(1, MAX_SWEEPS + 1):
            _lu_solve(dd, du, dl, du2, piv, x)
            for c in range(start, j):
                x -= np.dot(vecs[c], x) * vecs[c]
            x /= np.sqrt(np.sum(x * x))
            r = _residual(d, e, lam, x)
            if r < tol and it >= 2:
                break
        # deterministic sign: largest-magnitude-first component positive
        amax = np.max(np.abs(x))
        for i in range(n):
            if abs(x[i]) > 1e-3 * amax:
                if x[i] < 0:
                    x = -x
                break
        vecs[j] = x
        resid[j] = r
        sweeps[j] = it
    return vecs, resid, sweeps


def _check(d, e):
    d = np.ascontiguousarray(d, dtype=float)
    e = np.ascontiguousarray(e, dtype=float)
    if d.ndim != 1 or e.shape != (max(d.shape[0] - 1, 0),):
        raise ValueError("need diagonal of length n and off-diagonal of length n-1")
    return d, e


def count_below(d, e, x: float) -> int:
    """Sturm count: how many eigenvalues lie strictly below x."""
    d, e = _check(d, e)
    e2 = e * e
    pivmin = max(1e-300, EPS * EPS * max(1.0, float(e2.max()) if e2.size else 1.0))
    return int(sturm_count(d, e2, float(x), pivmin))


def eigvals_range(d, e, k0: int, k1: int) -> np.ndarray:
    """Eigenvalues with ascending indices k0 <= k < k1."""
    d, e = _check(d, e)
    k0, k1 = max(0, k0), min(d.shape[0], k1)
    if k1 <= k0:
        return np.empty(0)
    return _bisect_range(d, e, k0, k1)


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray


def eigenpairs(d, e, k0: int = 0, k1: int | None = None) -> EigenResult:
    """Eigenpairs k0 <= k < k1 (all by default), vectors unit-normalised."""
    d, e = _check(d, e)
    n = d.shape[0]
    k1 = n if k1 is None else k1
    values = eigvals_range(d, e, k0, k1)
    lo, hi = gershgorin(d, e)
    norm = max(abs(lo), abs(hi))
    if values.size == 0:
        return EigenResult(values, np.empty((n, 0)), np.empty(0), np.empty(0, dtype=bool))
    vecs, resid, sweeps = _inverse_iteration(d, e, values, norm, CLUSTER_GAP)
    converged = resid < 1e-6
    return EigenResult(values, vecs.T, resid, converged)
