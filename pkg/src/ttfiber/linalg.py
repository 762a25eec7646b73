"""Deterministic matrix factorizations the rest of the package builds on.

All routines canonicalize singular-vector signs (largest-magnitude entry made
positive, lowest index on ties) so repeated calls on identical input are
bitwise identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import RankDeficientError

# Numerical-rank threshold: sigma_{r+1}/sigma_1 <= tol counts as rank r.
# Noiseless synthetic data sits many orders of magnitude below; callers
# working with noisy data should raise it (10**(-snr_db/20) is a reasonable
# starting point).
DEFAULT_RANK_TOL = 1e-8


def canonicalize_signs(vecs, rows=None):
    """Flip column signs so each column's largest-|entry| is positive.

    Ties pick the lowest index.  If ``rows`` is given, the matching rows of
    that matrix are flipped along (keeps a factorization product intact).
    Returns the same arrays, modified in place.
    """
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        pivot = np.argmax(np.abs(col))
        if col[pivot] < 0:
            vecs[:, j] = -col
            if rows is not None:
                rows[j, :] = -rows[j, :]
    return vecs


@dataclass(frozen=True)
class TruncatedSVD:
    """Rank-R factors: U (JxR, orthonormal columns), S (descending), Vt (RxK)."""

    U: np.ndarray
    S: np.ndarray
    Vt: np.ndarray


def truncated_svd(mat, rank):
    """Best rank-``rank`` factors of ``mat`` with canonical column signs."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("expected a matrix")
    if not 0 <= rank <= min(mat.shape):
        raise ValueError(f"rank {rank} exceeds min{mat.shape}")
    U, s, Vt = scipy.linalg.svd(mat, full_matrices=False)
    U = np.ascontiguousarray(U[:, :rank])
    Vt = np.ascontiguousarray(Vt[:rank, :])
    canonicalize_signs(U, Vt)
    return TruncatedSVD(U, s[:rank].copy(), Vt)


def trailing_left_singvecs(mat, keep):
    """Orthonormal basis for the left singular subspace of the ``keep``
    smallest singular values.

    When the matrix has fewer columns than rows the implicit zero singular
    values (the kernel of ``mat.T``) are included via the full-size U, so
    ``keep`` may exceed the column count.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("expected a matrix")
    n_rows = mat.shape[0]
    if not 0 <= keep <= n_rows:
        raise ValueError(f"keep {keep} exceeds row count {n_rows}")
    if keep == 0:
        return np.empty((n_rows, 0))
    # Economy U is already the complete J x J left factor when the matrix is
    # wide; only tall matrices need full_matrices (their right factor is small).
    U = scipy.linalg.svd(mat, full_matrices=mat.shape[1] < n_rows)[0]
    out = np.ascontiguousarray(U[:, n_rows - keep:])
    return canonicalize_signs(out)


def lstsq(A, B, tol=DEFAULT_RANK_TOL):
    """Least-squares solution of A X = B for a full-column-rank A.

    Returns ``(X, residual)`` with residual the Frobenius norm of ``A X - B``.
    Raises :class:`RankDeficientError` when the singular-value ratio of A
    falls at or below ``tol`` (the system does not determine X uniquely).
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("expected a matrix for A")
    m, n = A.shape
    if n > 0:
        s = scipy.linalg.svd(A, compute_uv=False) if min(m, n) else np.array([])
        if m < n or s.size == 0 or s[0] == 0.0 or s[-1] <= tol * s[0]:
            raise RankDeficientError(
                f"coefficient matrix ({m}x{n}) is rank deficient at tol={tol:g}"
            )
    X = scipy.linalg.lstsq(A, B)[0]
    residual = float(np.linalg.norm(A @ X - B))
    return X, residual


def principal_angles(A, B):
    """Canonical angles (radians, ascending in [0, pi/2]) between two
    subspaces given by orthonormal-column matrices with equal row counts.

    Computed with the combined cosine/sine formulation rather than a bare
    arccos of the singular values of A.T @ B, which cannot resolve angles
    below the square root of machine precision.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("expected matrices with orthonormal columns")
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.empty(0)
    return np.sort(scipy.linalg.subspace_angles(A, B))
