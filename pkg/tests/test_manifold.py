import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_tt.errors import ConfigurationError, RetractionError
from robust_tt.manifold import (
    orthonormality_error,
    polar_retract,
    procrustes_rotation,
    stiefel_project,
    tangency_residual,
)


def orthonormal(rng, n, r):
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q


def test_symmetric_component_annihilated():
    rng = np.random.default_rng(0)
    L = orthonormal(rng, 8, 3)
    S = rng.standard_normal((3, 3))
    S = S + S.T
    assert np.linalg.norm(stiefel_project(L, L @ S)) <= 1e-12


def test_projection_idempotent():
    rng = np.random.default_rng(1)
    L = orthonormal(rng, 9, 4)
    T = stiefel_project(L, rng.standard_normal((9, 4)))
    np.testing.assert_allclose(stiefel_project(L, T), T, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 4), st.integers(0, 10**6))
def test_projection_tangency_and_norm(r, extra, seed):
    rng = np.random.default_rng(seed)
    n = r + extra
    L = orthonormal(rng, n, r)
    U = rng.standard_normal((n, r))
    T = stiefel_project(L, U)
    assert tangency_residual(L, T) <= 1e-10
    sym = U.T @ L + L.T @ U
    assert np.linalg.norm(T) <= np.linalg.norm(U) + 0.5 * np.linalg.norm(sym) + 1e-12


def test_projection_requires_orthonormal_base():
    with pytest.raises(ConfigurationError):
        stiefel_project(np.ones((4, 2)), np.ones((4, 2)))


def test_polar_examples():
    rng = np.random.default_rng(2)
    L = orthonormal(rng, 6, 3)
    np.testing.assert_allclose(polar_retract(L), L, atol=1e-12)
    np.testing.assert_allclose(polar_retract(2.0 * np.eye(3)), np.eye(3), atol=1e-12)


def test_polar_matches_inverse_sqrt_formula():
    rng = np.random.default_rng(3)
    G = rng.standard_normal((7, 3))
    w, V = np.linalg.eigh(G.T @ G)
    ref = G @ V @ np.diag(w ** -0.5) @ V.T
    np.testing.assert_allclose(polar_retract(G), ref, atol=1e-12)
    assert orthonormality_error(polar_retract(G)) <= 1e-10


def test_polar_rank_deficient():
    G = np.zeros((5, 2))
    G[0, 0] = 1.0
    with pytest.raises(RetractionError):
        polar_retract(G)


def test_polar_nonexpansive():
    rng = np.random.default_rng(4)
    worst = np.inf
    for _ in range(100):
        n = int(rng.integers(2, 10))
        r = int(rng.integers(1, n + 1))
        L, Lbar = orthonormal(rng, n, r), orthonormal(rng, n, r)
        xi = stiefel_project(L, rng.standard_normal((n, r)) * rng.uniform(0.01, 2.0))
        slack = np.linalg.norm(L + xi - Lbar) - np.linalg.norm(polar_retract(L + xi) - Lbar)
        worst = min(worst, slack)
    assert worst >= -1e-10


def test_procrustes_rotation():
    rng = np.random.default_rng(5)
    Q = orthonormal(rng, 4, 4)
    B = rng.standard_normal((10, 4))
    # argmin ||B Q - B R|| is recovered from M = (B)^T (B Q)
    R = procrustes_rotation(B.T @ (B @ Q))
    np.testing.assert_allclose(R, Q, atol=1e-10)
