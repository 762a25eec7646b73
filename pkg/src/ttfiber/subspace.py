"""Column-space estimation of a low-rank matrix from observed row blocks.

Each observed piece is a fully observed submatrix: a set of row indices into
the ambient matrix plus its values.  Two estimators are provided and kept
deliberately independent so they can cross-validate each other:

* ``constraint_basis`` stacks per-piece orthogonal complements (zero padded
  to the ambient row count) into one wide matrix and reads the column space
  off its near-kernel.
* ``intersection_basis`` builds, per piece, an orthonormal basis for every
  completion consistent with that piece (leading left singular vectors plus
  unit indicators for its missing rows) and intersects the pieces via the
  dominant left singular subspace of the stacked bases.

Both return the same subspace on valid noiseless input.

For small ambient dimensions the stacked matrix is formed explicitly and
factored with one LAPACK SVD.  For large ones the identical spectrum is
obtained from the Gram operator of the stack (sigma_i = sqrt(lambda_i)in a
matrix-free Lanczos solve), which is orders of magnitude faster and never
materializes the stack; the two routes agree to floating-point roundoff and
are cross-checked in the test suite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import IdentifiabilityError
from .linalg import DEFAULT_RANK_TOL, canonicalize_signs

# Route thresholds (module-level so tests can force either route).
DIRECT_SVD_MAX_DIM = 512
DIRECT_SVD_MAX_CELLS = 1_500_000
DENSE_EIG_MAX_DIM = 1024


@dataclass(frozen=True)
class ObservedSubmatrix:
    """Fully observed block: sorted row indices and the |alpha| x K values."""

    alpha: np.ndarray
    values: np.ndarray
    source: object = None

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.intp).ravel()
        values = np.asarray(self.values, dtype=np.float64)
        if alpha.size == 0:
            raise ValueError("an observed submatrix needs at least one row")
        if np.any(np.diff(alpha) <= 0):
            raise ValueError("row indices must be strictly increasing")
        if values.ndim != 2 or values.shape[0] != alpha.size:
            raise ValueError(
                f"values shape {values.shape} does not match {alpha.size} rows"
            )
        if not np.isfinite(values).all():
            raise ValueError("observed values must be finite")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SubspaceEstimate:
    """Orthonormal basis (ambient_dim x rank) plus identifiability diagnostics.

    ``gap`` is the method-specific margin: the ratio sigma_{J-R}/sigma_{J-R+1}
    of the stacked constraint matrix for the constraint method, the difference
    sigma_R - sigma_{R+1} of the stacked basis matrix for the intersection
    method.  Larger is safer; it collapses toward the failure threshold as the
    observation pattern approaches a non-identifiable one.
    """

    basis: np.ndarray
    gap: float
    n_used: int
    n_skipped: int

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def rank(self):
        return self.basis.shape[1]


def combine_slice_pairs(subs, rank):
    """Merge every pair of pieces sharing >= ``rank`` rows into a new piece.

    The merged piece keeps the shared rows and concatenates both column
    blocks, so it spans strictly more columns than either parent and sharpens
    the column-space estimate, at the cost of quadratically many candidates.
    """
    subs = list(subs)
    if len(subs) < 2:
        return []
    dim = max(int(s.alpha[-1]) for s in subs) + 1
    flags = np.zeros((len(subs), dim), dtype=bool)
    for i, sub in enumerate(subs):
        flags[i, sub.alpha] = True
    overlap = flags.astype(np.float64) @ flags.T
    out = []
    for i, j in zip(*np.nonzero(np.triu(overlap >= rank, k=1))):
        common, idx_i, idx_j = np.intersect1d(
            subs[i].alpha, subs[j].alpha, assume_unique=True, return_indices=True
        )
        out.append(
            ObservedSubmatrix(
                alpha=common,
                values=np.hstack([subs[i].values[idx_i], subs[j].values[idx_j]]),
                source=(subs[i].source, subs[j].source),
            )
        )
    return out


def _partition_usable(subs, rank):
    """Split pieces into informative ones (> rank rows, >= rank columns) and
    the rest, which carry no column-space information at this rank."""
    usable, skipped = [], 0
    for sub in subs:
        if sub.alpha.size > rank and sub.values.shape[1] >= rank:
            usable.append(sub)
        else:
            skipped += 1
    if skipped:
        warnings.warn(
            f"skipped {skipped} observed submatrices with at most rank={rank} rows "
            f"(or fewer than {rank} columns); they cannot constrain the column space",
            stacklevel=3,
        )
    if not usable:
        raise IdentifiabilityError(
            f"no observed submatrix has more than rank={rank} rows; "
            "the column space is unconstrained"
        )
    return usable, skipped


def _leading_left_vecs(subs, rank):
    """Leading-``rank`` left singular vectors per piece, batched by shape."""
    out = [None] * len(subs)
    groups = {}
    for i, sub in enumerate(subs):
        groups.setdefault(sub.values.shape, []).append(i)
    for idxs in groups.values():
        stack = np.stack([subs[i].values for i in idxs])
        U = np.linalg.svd(stack, full_matrices=False)[0][:, :, :rank]
        for pos, i in enumerate(idxs):
            out[i] = U[pos]
    return out


def _trailing_left_vecs(subs, rank):
    """Orthonormal complement of each piece's leading-``rank`` left subspace,
    batched by shape.  Wide pieces get the complete left factor from the
    economy SVD; tall pieces need the full one (their right factor is small)."""
    out = [None] * len(subs)
    groups = {}
    for i, sub in enumerate(subs):
        groups.setdefault(sub.values.shape, []).append(i)
    for (n_rows, n_cols), idxs in groups.items():
        stack = np.stack([subs[i].values for i in idxs])
        U = np.linalg.svd(stack, full_matrices=n_cols < n_rows)[0][:, :, rank:]
        for pos, i in enumerate(idxs):
            out[i] = U[pos]
    return out


def _coverage_counts(usable, ambient_dim):
    counts = np.zeros(ambient_dim)
    for sub in usable:
        counts[sub.alpha] += 1.0
    uncovered = np.flatnonzero(counts == 0)
    if uncovered.size:
        head = ", ".join(map(str, uncovered[:8]))
        raise IdentifiabilityError(
            f"{uncovered.size} rows (e.g. {head}) appear in no usable observed "
            "submatrix; their column-space components are unconstrained"
        )
    return counts


def _stacked_basis_matrix(usable, ambient_dim, rank, lead_vecs):
    """Padded per-piece bases side by side: ambient_dim x (n_used * rank)."""
    stack = np.zeros((ambient_dim, len(usable) * rank))
    for i, (sub, vecs) in enumerate(zip(usable, lead_vecs)):
        stack[sub.alpha, i * rank:(i + 1) * rank] = vecs
    return stack


# Relative defect below which the top Gram eigenvalue cluster counts as exact.
CLUSTER_TOL = 1e-8


def _gram_spectrum(P, counts, n_used, rank):
    """Spectral data of the stacked-basis Gram diag(miss) + P @ P.T.

    Returns ``(lam, vecs, n_cluster)``: the top rank+1 eigenvalues
    (descending), the top-rank eigenvectors, and the exact multiplicity of
    the top cluster at eigenvalue ``n_used``.

    The complement Gram satisfies NNᵀ = n_used*I - QQᵀ, and a direction v
    attains the top eigenvalue n_used iff D^(1/2) v lies in the fixed space
    of Y Yᵀ with Y = D^(-1/2) P (D = per-row coverage counts).  The fixed
    space drops out of the small eigenproblem Pᵀ D⁻¹ P, so the degenerate
    noiseless cluster is found exactly without any iteration; noisy inputs
    have no exact degeneracy and are safe for a Lanczos solve.
    """
    dim = counts.size
    miss = (n_used - counts).astype(np.float64)
    if dim <= DENSE_EIG_MAX_DIM:
        w, V = scipy.linalg.eigh(np.diag(miss) + P @ P.T)
        n_cluster = int(np.count_nonzero(w >= n_used * (1.0 - CLUSTER_TOL)))
        return w[::-1][: rank + 1].copy(), V[:, ::-1][:, :rank].copy(), n_cluster

    scaled = P / counts[:, None]
    small = P.T @ scaled
    mu_vals, mu_vecs = scipy.linalg.eigh(0.5 * (small + small.T))
    n_cluster = int(np.count_nonzero(mu_vals >= 1.0 - CLUSTER_TOL))

    def matvec(v):
        return miss * v + P @ (P.T @ v)

    def dense_solve():
        w, V = scipy.linalg.eigh(np.diag(miss) + P @ P.T)
        return w[::-1][: rank + 1].copy(), V[:, ::-1][:, :rank].copy()

    rng = np.random.default_rng(0x5EED)  # fixed: output must not vary per call

    if n_cluster > rank:
        # Deficient input; the caller rejects it, so the cluster itself is
        # all that needs reporting.
        lam = np.full(rank + 1, float(n_used))
        vecs = np.linalg.qr(scaled @ mu_vecs[:, mu_vals.size - rank:])[0]
        return lam, vecs, n_cluster

    if n_cluster == rank:
        # Exact top cluster: lift the small-problem eigenvectors back up.
        vecs = np.linalg.qr(scaled @ mu_vecs[:, mu_vals.size - rank:])[0]
        block = miss[:, None] * vecs + P @ (P.T @ vecs)
        lam_top = np.sort(np.einsum("ij,ij->j", vecs, block))[::-1]
        # Next eigenvalue from the cluster-deflated operator; k=1 extreme
        # values are multiplicity-safe.
        shift = float(n_used + 1)
        deflated = scipy.sparse.linalg.LinearOperator(
            (dim, dim),
            matvec=lambda v: matvec(v) - shift * (vecs @ (vecs.T @ v)),
            dtype=np.float64,
        )
        try:
            lam_next = scipy.sparse.linalg.eigsh(
                deflated,
                k=1,
                which="LA",
                v0=rng.standard_normal(dim),
                ncv=min(dim, 40),
                return_eigenvectors=False,
            )[0]
        except scipy.sparse.linalg.ArpackError:
            return (*dense_solve(), n_cluster)
        return np.concatenate([lam_top, [lam_next]]), vecs, n_cluster

    # No exact degeneracy at the top: implicitly restarted Lanczos is
    # dependable here (its failure mode is exact multiplicity).
    operator = scipy.sparse.linalg.LinearOperator(
        (dim, dim), matvec=matvec, dtype=np.float64
    )
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(
            operator,
            k=rank + 1,
            which="LA",
            v0=rng.standard_normal(dim),
            ncv=min(dim, max(6 * (rank + 1), 40)),
        )
    except scipy.sparse.linalg.ArpackError:
        return (*dense_solve(), n_cluster)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order[:rank]], n_cluster


def constraint_basis(subs, ambient_dim, rank, tol=DEFAULT_RANK_TOL):
    """Column-space basis from stacked orthogonal-complement constraints.

    Every usable piece contributes its trailing left singular vectors, zero
    padded to the ambient row count; the basis is the trailing-``rank`` left
    singular subspace of the stack.  Raises when the constraints leave a
    kernel larger than ``rank`` (the pieces do not determine the space).
    """
    if rank == ambient_dim:
        return SubspaceEstimate(np.eye(ambient_dim), math.inf, 0, len(list(subs)))
    usable, skipped = _partition_usable(subs, rank)
    counts = _coverage_counts(usable, ambient_dim)
    n_constraints = sum(sub.alpha.size - rank for sub in usable)
    if n_constraints < ambient_dim - rank:
        raise IdentifiabilityError(
            f"only {n_constraints} complement constraints available, need at "
            f"least {ambient_dim - rank} to pin down a rank-{rank} column space"
        )

    if ambient_dim <= DIRECT_SVD_MAX_DIM and ambient_dim * n_constraints <= DIRECT_SVD_MAX_CELLS:
        stack = np.zeros((ambient_dim, n_constraints))
        col = 0
        for sub, comp in zip(usable, _trailing_left_vecs(usable, rank)):
            stack[sub.alpha, col:col + comp.shape[1]] = comp
            col += comp.shape[1]
        U, s, _ = scipy.linalg.svd(stack, full_matrices=n_constraints < ambient_dim)
        sigma = np.zeros(ambient_dim)
        sigma[: s.size] = s
        if sigma[0] == 0.0:
            raise IdentifiabilityError("all stacked constraints are zero")
        n_rank = int(np.count_nonzero(sigma > tol * sigma[0]))
        kernel_dim = ambient_dim - n_rank
        if kernel_dim > rank:
            raise IdentifiabilityError(
                f"constraint kernel has dimension {kernel_dim} > rank {rank} at "
                f"tol={tol:g}: the observed submatrices are not informationally "
                "complete"
            )
        basis = canonicalize_signs(np.ascontiguousarray(U[:, ambient_dim - rank:]))
        smallest_kept = sigma[ambient_dim - rank - 1]
        largest_dropped = sigma[ambient_dim - rank]
    else:
        # The complement Gram NNᵀ equals L*I - QQᵀ of the stacked leading
        # bases, so the trailing left singular subspace of the constraint
        # stack is read off the top of the basis-stack Gram without ever
        # materializing the complements.
        lead = _leading_left_vecs(usable, rank)
        stack = _stacked_basis_matrix(usable, ambient_dim, rank, lead)
        n_used = len(usable)
        lam, vecs, n_cluster = _gram_spectrum(stack, counts, n_used, rank)
        if n_cluster > rank:
            raise IdentifiabilityError(
                f"constraint kernel has dimension {n_cluster} > rank {rank}: "
                "the observed submatrices are not informationally complete"
            )
        small = np.clip(n_used - lam, 0.0, None)  # ascending
        if small[rank] <= tol * tol * counts.max():
            raise IdentifiabilityError(
                f"constraint kernel has dimension > rank {rank} at tol={tol:g}: "
                "the observed submatrices are not informationally complete"
            )
        basis = canonicalize_signs(np.ascontiguousarray(vecs))
        smallest_kept = math.sqrt(small[rank])
        largest_dropped = math.sqrt(small[rank - 1])

    gap = smallest_kept / largest_dropped if largest_dropped > 0.0 else math.inf
    return SubspaceEstimate(basis, float(gap), len(usable), skipped)


def intersection_basis(subs, ambient_dim, rank, tol=DEFAULT_RANK_TOL):
    """Column-space basis as the intersection of per-piece completion spaces.

    Each usable piece yields an orthonormal basis of the space of all its
    completions (padded leading singular vectors plus unit indicators for its
    missing rows); the intersection is the leading-``rank`` left singular
    subspace of the stacked bases.  Raises when the intersection dimension
    exceeds ``rank``.
    """
    if rank == ambient_dim:
        return SubspaceEstimate(np.eye(ambient_dim), math.inf, 0, len(list(subs)))
    usable, skipped = _partition_usable(subs, rank)
    counts = _coverage_counts(usable, ambient_dim)
    n_used = len(usable)
    lead = _leading_left_vecs(usable, rank)
    n_pad = sum(ambient_dim - sub.alpha.size for sub in usable)
    width = n_used * rank + n_pad

    if ambient_dim <= DIRECT_SVD_MAX_DIM and ambient_dim * width <= DIRECT_SVD_MAX_CELLS:
        stack = np.zeros((ambient_dim, width))
        col = 0
        for sub, vecs in zip(usable, lead):
            stack[sub.alpha, col:col + rank] = vecs
            col += rank
            missing = np.setdiff1d(np.arange(ambient_dim), sub.alpha, assume_unique=True)
            stack[missing, col + np.arange(missing.size)] = 1.0
            col += missing.size
        U, s, _ = scipy.linalg.svd(stack, full_matrices=False)
        sigma = np.zeros(max(ambient_dim, rank + 1))
        sigma[: s.size] = s
        top = sigma[: rank + 1] ** 2
        vecs_out = U[:, :rank]
    else:
        stack = _stacked_basis_matrix(usable, ambient_dim, rank, lead)
        lam, vecs_out, n_cluster = _gram_spectrum(stack, counts, n_used, rank)
        if n_cluster > rank:
            raise IdentifiabilityError(
                f"intersection of completion spaces has dimension {n_cluster} > "
                f"rank {rank}: the observed submatrices are not informationally "
                "complete"
            )
        top = np.clip(lam, 0.0, None)

    # A direction lying in every piece's completion space scores exactly
    # n_used; more than ``rank`` of those means the intersection is too big.
    if top[rank] >= n_used * (1.0 - max(tol, 1e-12)):
        raise IdentifiabilityError(
            f"intersection of completion spaces has dimension > rank {rank} at "
            f"tol={tol:g}: the observed submatrices are not informationally "
            "complete"
        )
    basis = canonicalize_signs(np.ascontiguousarray(vecs_out))
    gap = math.sqrt(top[rank - 1]) - math.sqrt(top[rank])
    return SubspaceEstimate(basis, float(gap), n_used, skipped)
