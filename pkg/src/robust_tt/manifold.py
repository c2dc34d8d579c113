"""Stiefel manifold tools: tangent projection and polar retraction."""

import numpy as np

from .errors import ConfigurationError, RetractionError

ORTHONORMAL_TOL = 1e-8
RANK_TOL = 1e-12


def orthonormality_error(L):
    L = np.asarray(L)
    return float(np.linalg.norm(L.T @ L - np.eye(L.shape[1])))


def stiefel_project(L, U, check=True):
    """Project ``U`` onto the tangent space of the Stiefel manifold at ``L``.

    ``P(U) = U - L sym(L^T U)``; the result ``T`` satisfies
    ``T^T L + L^T T = 0``.
    """
    L = np.asarray(L, dtype=float)
    U = np.asarray(U, dtype=float)
    if L.shape != U.shape:
        raise ConfigurationError(f"shape mismatch {L.shape} vs {U.shape}")
    if check and orthonormality_error(L) > ORTHONORMAL_TOL:
        raise ConfigurationError("base point is not orthonormal")
    LtU = L.T @ U
    return U - 0.5 * L @ (LtU + LtU.T)


def tangency_residual(L, T):
    return float(np.linalg.norm(T.T @ L + L.T @ T))


def polar_retract(G):
    """Orthonormal polar factor ``G (G^T G)^{-1/2}``, computed as ``U V^T``."""
    G = np.asarray(G, dtype=float)
    u, s, vt = np.linalg.svd(G, full_matrices=False)
    if s.size == 0 or s[-1] <= RANK_TOL or not np.all(np.isfinite(s)):
        raise RetractionError(
            f"retraction input is rank deficient (smallest singular value {s[-1] if s.size else 0.0:.3e})"
        )
    return u @ vt


def procrustes_rotation(M):
    """Orthogonal ``R`` maximizing ``<M, R>``."""
    u, _, vt = np.linalg.svd(M)
    return u @ vt
