"""Tensor-train decomposition of full tensors and completion of tensors
observed fiber-wise along the last mode.

``tt_svd`` is the classical sequential algorithm; ``parallel_tt_svd``
computes one orthonormal range basis per unfolding independently and then
assembles the cores by projecting consecutive bases onto each other.
``complete`` follows the same core assembly but estimates each range basis
from the observed row blocks of the unfolding, takes the last core from the
right singular vectors of the observed rows of the last unfolding, and
recovers the next-to-last core from per-slice least-squares systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    IdentifiabilityError,
    InsufficientFibersError,
    PatternValidationError,
    RankDeficientError,
)
from .linalg import DEFAULT_RANK_TOL, canonicalize_signs, lstsq, truncated_svd
from .patterns import assert_mask_matches, slice_observations, validate_pattern
from .subspace import (
    ObservedSubmatrix,
    combine_slice_pairs,
    constraint_basis,
    intersection_basis,
)
from .tensor import TensorTrain, reshape3, tt_left_matrix, unfold

METHODS = ("intersection", "constraint")
COMBINES = ("none", "pairs")


@dataclass(frozen=True)
class CompletionConfig:
    """Knobs for :func:`complete`.

    ``tol`` is the numerical rank-gap threshold used both by the subspace
    identifiability checks and the per-slice solves; raise it toward
    10**(-snr_db/20) for noisy data if you want failures flagged rather than
    best-effort estimates.
    """

    ranks: tuple
    method: str = "intersection"
    combine: str = "none"
    tol: float = DEFAULT_RANK_TOL
    validate_first: bool = True

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.combine not in COMBINES:
            raise ValueError(f"combine must be one of {COMBINES}, got {self.combine!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def check_ranks(shape, ranks):
    """Validate a rank tuple against a shape; returns the tuple of ints."""
    shape = tuple(int(s) for s in shape)
    ranks = tuple(int(r) for r in ranks)
    n_modes = len(shape)
    if len(ranks) != n_modes + 1:
        raise ValueError(f"need {n_modes + 1} ranks for {n_modes} modes, got {len(ranks)}")
    if ranks[0] != 1 or ranks[-1] != 1:
        raise ValueError("boundary ranks must both be 1")
    if any(r < 1 for r in ranks):
        raise ValueError("ranks must be positive")
    for n in range(1, n_modes):
        rows = math.prod(shape[:n])
        cols = math.prod(shape[n:])
        if ranks[n] > min(rows, cols):
            raise ValueError(
                f"rank {ranks[n]} at split {n} exceeds min({rows}, {cols})"
            )
        if ranks[n] > ranks[n - 1] * shape[n - 1]:
            raise ValueError(
                f"rank {ranks[n]} at split {n} exceeds the chain bound "
                f"{ranks[n - 1]}*{shape[n - 1]}"
            )
    return ranks


def tt_svd(t, ranks):
    """Sequential decomposition: truncated SVD of the current unfolding,
    reshape the left factor into a core, carry S @ Vt forward."""
    t = np.asarray(t, dtype=np.float64)
    ranks = check_ranks(t.shape, ranks)
    shape = t.shape
    n_modes = len(shape)
    cores = []
    carry = t.reshape(shape[0], -1, order="F")
    for n in range(1, n_modes):
        factors = truncated_svd(carry, ranks[n])
        cores.append(factors.U.reshape(ranks[n - 1], shape[n - 1], ranks[n], order="F"))
        carry = factors.S[:, None] * factors.Vt
        if n < n_modes - 1:
            carry = carry.reshape(ranks[n] * shape[n], -1, order="F")
    cores.append(carry.reshape(ranks[-2], shape[-1], 1, order="F"))
    return TensorTrain(tuple(cores))


def _project_next_basis(basis, next_basis, size, rank_next):
    """Core n+1 from consecutive range bases: reshape the next basis to group
    its last mode index with the rank column, then project on ``basis``."""
    rows = basis.shape[0]
    mat = next_basis.reshape(rows, size * rank_next, order="F")
    return (basis.T @ mat).reshape(basis.shape[1], size, rank_next, order="F")


def parallel_tt_svd(t, ranks):
    """Range bases of all unfoldings computed independently, cores assembled
    by projecting each basis onto the previous one."""
    t = np.asarray(t, dtype=np.float64)
    ranks = check_ranks(t.shape, ranks)
    shape = t.shape
    n_modes = len(shape)
    bases = []
    carry_last = None
    for n in range(1, n_modes):
        factors = truncated_svd(unfold(t, n), ranks[n])
        bases.append(factors.U)
        if n == n_modes - 1:
            carry_last = factors.S[:, None] * factors.Vt
    cores = [bases[0].reshape(1, shape[0], ranks[1], order="F")]
    for n in range(1, n_modes - 1):
        cores.append(_project_next_basis(bases[n - 1], bases[n], shape[n], ranks[n + 1]))
    cores.append(carry_last.reshape(ranks[-2], shape[-1], 1, order="F"))
    return TensorTrain(tuple(cores))


def _observed_blocks(t3, observations):
    return [
        ObservedSubmatrix(
            alpha=obs.alpha,
            values=t3[obs.alpha, obs.slice_index, :],
            source=obs.slice_index,
        )
        for obs in observations
    ]


def complete(data, pattern, config):
    """Decompose a tensor whose unobserved last-mode fibers are NaN.

    Returns ``(TensorTrain, diagnostics)``.  Diagnostics carry the per-split
    identifiability gaps, per-slice residuals of the next-to-last-core solves,
    the singular values of the observed rows of the last unfolding (useful for
    choosing ranks manually), and the validation report when it ran.
    """
    data = np.asarray(data, dtype=np.float64)
    n_modes = data.ndim
    if n_modes < 3:
        raise ValueError("completion needs an order-3 or higher tensor")
    ranks = check_ranks(data.shape, config.ranks)
    assert_mask_matches(data, pattern)
    shape = data.shape

    diagnostics = {
        "method": config.method,
        "combine": config.combine,
        "observed_fibers": pattern.observed_count,
        "unfoldings": [],
    }
    if config.validate_first:
        report = validate_pattern(pattern, ranks)
        diagnostics["validation"] = report.to_dict()
        if not report.overall_valid:
            raise PatternValidationError(
                "observation pattern fails the recovery conditions: "
                + "; ".join(report.messages),
                report=report,
            )

    if pattern.observed_count < ranks[n_modes - 1]:
        raise InsufficientFibersError(
            f"only {pattern.observed_count} fibers observed, need at least "
            f"{ranks[n_modes - 1]} for the last core"
        )

    # A slice of the split-n reshaping factors through the downstream cores,
    # so its rank generically caps at min(R_{n+1}, ..., R_{N-1}, I_N); pairs
    # of slices at most double that.  A cap below R_n means no observed
    # submatrix can be rank preserving, regardless of the pattern.
    pair_factor = 2 if config.combine == "pairs" else 1
    for split in range(1, n_modes - 1):
        cap = pair_factor * min(min(ranks[split + 1:n_modes]), shape[-1])
        if ranks[split] > cap:
            raise IdentifiabilityError(
                f"rank {ranks[split]} at split {split} exceeds the generic rank "
                f"{cap} of its observed submatrices; no submatrix can preserve "
                "the unfolding rank",
                split=split,
            )

    estimate = intersection_basis if config.method == "intersection" else constraint_basis

    bases = []
    for split in range(1, n_modes - 1):
        t3 = reshape3(data, split)
        blocks = _observed_blocks(t3, slice_observations(pattern, split))
        if config.combine == "pairs":
            blocks = blocks + combine_slice_pairs(blocks, ranks[split])
        rows = t3.shape[0]
        try:
            est = estimate(blocks, rows, ranks[split], tol=config.tol)
        except IdentifiabilityError as err:
            raise type(err)(
                f"range of unfolding {split} not identifiable: {err}", split=split
            ) from err
        bases.append(est)
        diagnostics["unfoldings"].append(
            {
                "split": split,
                "gap": est.gap,
                "n_used": est.n_used,
                "n_skipped": est.n_skipped,
            }
        )

    cores = [bases[0].basis.reshape(1, shape[0], ranks[1], order="F")]
    for n in range(1, n_modes - 2):
        cores.append(
            _project_next_basis(bases[n - 1].basis, bases[n].basis, shape[n], ranks[n + 1])
        )

    observed_rows = unfold(data, n_modes - 1)[pattern.observed]
    U, s, Vt = scipy.linalg.svd(observed_rows, full_matrices=False)
    last_rank = ranks[n_modes - 1]
    last_mat = np.ascontiguousarray(Vt[:last_rank, :])
    canonicalize_signs(U[:, :last_rank], last_mat)
    diagnostics["last_unfolding_singvals"] = s.tolist()

    left = tt_left_matrix(cores)
    t3 = reshape3(data, n_modes - 2)
    by_slice = {obs.slice_index: obs for obs in slice_observations(pattern, n_modes - 2)}
    pen_rank = ranks[n_modes - 2]
    pen_core = np.empty((pen_rank, shape[n_modes - 2], last_rank))
    residuals = []
    for i in range(shape[n_modes - 2]):
        obs = by_slice.get(i)
        if obs is None:
            raise RankDeficientError(
                f"slice {i} of the next-to-last-mode reshaping has no observed "
                "rows; its core slice is unidentifiable",
                slice_index=i,
            )
        system = left[obs.alpha]
        rhs = t3[obs.alpha, i, :] @ last_mat.T
        try:
            pen_core[:, i, :], res = lstsq(system, rhs, tol=config.tol)
        except RankDeficientError as err:
            raise RankDeficientError(
                f"next-to-last core slice {i}: system of {obs.alpha.size} observed "
                f"rows is rank deficient (need at least {pen_rank} well-spread rows): "
                f"{err}",
                slice_index=i,
            ) from err
        residuals.append(res)
    diagnostics["slice_residuals"] = residuals

    cores.append(pen_core)
    cores.append(last_mat.reshape(last_rank, shape[-1], 1, order="F"))
    return TensorTrain(tuple(cores)), diagnostics


def reconstruct_fibers(tt, pattern, data):
    """Dense tensor with observed fibers copied verbatim from ``data`` and
    missing fibers evaluated from the decomposition."""
    from .tensor import tt_to_dense

    data = np.asarray(data, dtype=np.float64)
    if tt.shape != data.shape:
        raise ValueError(f"decomposition shape {tt.shape} != data shape {data.shape}")
    assert_mask_matches(data, pattern)
    out = tt_to_dense(tt)
    grid = pattern.grid()
    out[grid] = data[grid]
    return out
