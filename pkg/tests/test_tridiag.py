import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from planar_monopole import tridiag


def test_three_by_three_exact():
    d, e = np.full(3, 2.0), np.full(2, -1.0)
    res = tridiag.eigenpairs(d, e)
    np.testing.assert_allclose(res.values, [2 - np.sqrt(2), 2.0, 2 + np.sqrt(2)], atol=1e-15)
    r2 = np.sqrt(2)
    exact = np.array([[1 / 2, r2 / 2, 1 / 2], [1 / r2, 0, -1 / r2], [1 / 2, -r2 / 2, 1 / 2]]).T
    np.testing.assert_allclose(np.abs(res.vectors), np.abs(exact), atol=1e-14)
    assert res.converged.all()


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 2**31 - 1))
def test_matches_scipy_on_random_matrices(n, seed):
    rng = np.random.default_rng(seed)
    d, e = rng.normal(size=n), rng.normal(size=n - 1)
    ref_w, ref_v = eigh_tridiagonal(d, e)
    res = tridiag.eigenpairs(d, e)
    scale = max(1.0, np.max(np.abs(ref_w)))
    np.testing.assert_allclose(res.values, ref_w, atol=1e-12 * scale)
    v = res.vectors
    np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-9)
    gaps = np.diff(ref_w)
    for k in range(n):
        isolated = (k == 0 or gaps[k - 1] > 1e-6) and (k == n - 1 or gaps[k] > 1e-6)
        if isolated:
            assert abs(abs(v[:, k] @ ref_v[:, k]) - 1) < 1e-8


def test_index_range_and_sturm_count():
    rng = np.random.default_rng(7)
    d, e = rng.normal(size=200), rng.normal(size=199)
    full = tridiag.eigvals_range(d, e, 0, 200)
    np.testing.assert_array_equal(tridiag.eigvals_range(d, e, 50, 60), full[50:60])
    x = 0.5 * (full[120] + full[121])
    assert tridiag.count_below(d, e, x) == 121


def test_clustered_eigenvalues_stay_orthogonal():
    # nearly decoupled blocks give eigenvalues equal to working precision
    d = np.tile([1.0, 3.0], 20)
    e = np.full(39, 1e-15)
    res = tridiag.eigenpairs(d, e)
    np.testing.assert_allclose(res.values[:20], 1.0, atol=1e-13)
    np.testing.assert_allclose(res.vectors.T @ res.vectors, np.eye(40), atol=1e-10)


def test_sign_convention_is_deterministic():
    d, e = np.linspace(0, 1, 30), np.full(29, 0.3)
    a = tridiag.eigenpairs(d, e).vectors
    b = tridiag.eigenpairs(d, e).vectors
    np.testing.assert_array_equal(a, b)


def test_shape_validation():
    with pytest.raises(ValueError):
        tridiag.eigenpairs(np.ones(3), np.ones(3))
