"""Fiber-wise observation patterns: representation, generation, validation.

A pattern marks which last-mode fibers of an (I_1, ..., I_N) tensor are fully
observed.  Flags are stored flat over (I_1, ..., I_{N-1}), first index
fastest, so a fiber maps to one whole row of the last unfolding and, at any
earlier split n, to one row of one mode-2 slice of the three-way reshaping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from .errors import MaskMismatchError


@dataclass(frozen=True)
class FiberPattern:
    """Boolean flags over the leading modes; True = fiber fully observed."""

    base_shape: tuple
    observed: np.ndarray

    def __post_init__(self):
        base_shape = tuple(int(s) for s in self.base_shape)
        if not base_shape or any(s < 1 for s in base_shape):
            raise ValueError(f"bad base shape {base_shape}")
        observed = np.asarray(self.observed, dtype=bool).ravel()
        if observed.size != math.prod(base_shape):
            raise ValueError(
                f"{observed.size} flags do not cover base shape {base_shape}"
            )
        if not observed.any():
            raise ValueError("at least one fiber must be observed")
        observed.setflags(write=False)
        object.__setattr__(self, "base_shape", base_shape)
        object.__setattr__(self, "observed", observed)

    @property
    def n_fibers(self):
        return self.observed.size

    @property
    def observed_count(self):
        return int(self.observed.sum())

    def grid(self):
        """Flags as a boolean array of shape ``base_shape``."""
        return self.observed.reshape(self.base_shape, order="F")


def full_pattern(base_shape):
    return FiberPattern(tuple(base_shape), np.ones(math.prod(base_shape), dtype=bool))


@dataclass(frozen=True)
class SliceObservation:
    """Observed row set of one mode-2 slice of a three-way reshaping."""

    split: int
    slice_index: int
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.intp).ravel()
        if alpha.size == 0:
            raise ValueError("slice observation must list at least one row")
        if np.any(np.diff(alpha) <= 0):
            raise ValueError("row indices must be strictly increasing")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)


def _split_dims(pattern, split):
    n_base = len(pattern.base_shape)
    if not 1 <= split <= n_base - 1:
        raise ValueError(f"split must be in [1, {n_base - 1}], got {split}")
    rows = math.prod(pattern.base_shape[:split])
    n_slices = math.prod(pattern.base_shape[split:])
    return rows, n_slices


def slice_flags(pattern, split):
    """Flags as a (rows x slices) boolean matrix for the given split."""
    rows, n_slices = _split_dims(pattern, split)
    return pattern.observed.reshape(rows, n_slices, order="F")


def slice_observations(pattern, split):
    """Per-slice observed row sets at the given split; empty slices omitted."""
    flags = slice_flags(pattern, split)
    out = []
    for l in range(flags.shape[1]):
        alpha = np.flatnonzero(flags[:, l])
        if alpha.size:
            out.append(SliceObservation(split, l, alpha))
    return out


@dataclass(frozen=True)
class SplitCheck:
    """Combinatorial screen for one unfolding split."""

    split: int
    rank: int
    min_rows_per_slice: int
    usable_slices: int
    overlap_graph_connected: bool
    union_covers_all_rows: bool
    covering_component_exists: bool

    @property
    def ok(self):
        return self.covering_component_exists

    def to_dict(self):
        return {
            "split": self.split,
            "rank": self.rank,
            "min_rows_per_slice": self.min_rows_per_slice,
            "usable_slices": self.usable_slices,
            "overlap_graph_connected": self.overlap_graph_connected,
            "union_covers_all_rows": self.union_covers_all_rows,
            "ok": self.ok,
        }


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the generic recovery conditions for a pattern and rank tuple.

    The screen is generic: it certifies the conditions that hold with
    probability one for tensors with continuously distributed entries, not a
    proof of identifiability for one specific value assignment.
    """

    splits: tuple
    observed_fiber_count: int
    last_core_ok: bool
    penultimate_ok: bool
    overall_valid: bool
    messages: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "splits": [s.to_dict() for s in self.splits],
            "observed_fiber_count": self.observed_fiber_count,
            "last_core_ok": self.last_core_ok,
            "penultimate_ok": self.penultimate_ok,
            "overall_valid": self.overall_valid,
            "messages": list(self.messages),
        }


def _check_split(pattern, split, rank):
    flags = slice_flags(pattern, split)
    rows = flags.shape[0]
    counts = flags.sum(axis=0)
    usable = np.flatnonzero(counts >= rank)
    min_rows = int(counts.min())
    messages = []

    if usable.size == 0:
        return (
            SplitCheck(split, rank, min_rows, 0, False, False, False),
            [f"split {split}: no slice has at least {rank} observed rows"],
        )

    sub = flags[:, usable]
    covers_all = bool(sub.any(axis=1).all())
    overlaps = sub.T.astype(np.float64) @ sub
    adjacency = overlaps >= rank
    np.fill_diagonal(adjacency, False)
    n_comp, labels = scipy.sparse.csgraph.connected_components(
        scipy.sparse.csr_matrix(adjacency), directed=False
    )
    connected = n_comp == 1
    covering = False
    for comp in range(n_comp):
        if sub[:, labels == comp].any(axis=1).all():
            covering = True
            break
    if not covering:
        detail = []
        if not covers_all:
            uncovered = int(rows - sub.any(axis=1).sum())
            detail.append(f"{uncovered} rows never observed in a usable slice")
        if not connected:
            detail.append(
                f"overlap graph (edges need {rank} shared rows) has {n_comp} components"
            )
        messages.append(
            f"split {split}: no connected group of slices with >= {rank} observed "
            f"rows covers all {rows} rows ({'; '.join(detail) or 'coverage split across components'})"
        )
    return (
        SplitCheck(split, rank, min_rows, int(usable.size), connected, covers_all, covering),
        messages,
    )


def validate_pattern(pattern, ranks):
    """Check the generic recovery conditions for ``ranks`` on this pattern.

    Per split n in {1..N-2}: some connected component of the overlap graph
    (slices with >= R_n observed rows, edges for >= R_n shared rows) must
    cover every row.  Additionally the observed fiber count must reach
    R_{N-1} and every slice at split N-2 needs >= R_{N-2} observed rows.
    """
    n_modes = len(pattern.base_shape) + 1
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != n_modes + 1 or ranks[0] != 1 or ranks[-1] != 1:
        raise ValueError(f"need {n_modes + 1} ranks with boundary ranks 1, got {ranks}")
    if any(r < 1 for r in ranks):
        raise ValueError("ranks must be positive")

    messages = []
    checks = []
    for split in range(1, n_modes - 1):
        check, msgs = _check_split(pattern, split, ranks[split])
        checks.append(check)
        messages.extend(msgs)

    observed = pattern.observed_count
    last_ok = observed >= ranks[n_modes - 1]
    if not last_ok:
        messages.append(
            f"last core: only {observed} observed fibers, need at least {ranks[n_modes - 1]}"
        )

    pen_split = n_modes - 2
    pen_rank = ranks[pen_split]
    pen_counts = slice_flags(pattern, pen_split).sum(axis=0)
    pen_ok = bool(pen_counts.min() >= pen_rank)
    if not pen_ok:
        worst = int(np.argmin(pen_counts))
        messages.append(
            f"next-to-last core: slice {worst} at split {pen_split} has "
            f"{int(pen_counts[worst])} observed rows, need at least {pen_rank}"
        )

    overall = all(c.ok for c in checks) and last_ok and pen_ok
    return ConditionReport(
        splits=tuple(checks),
        observed_fiber_count=observed,
        last_core_ok=last_ok,
        penultimate_ok=pen_ok,
        overall_valid=overall,
        messages=tuple(messages),
    )


def random_pattern(base_shape, missing_rate, seed):
    """Pattern with exactly round(missing_rate * total) fibers unobserved,
    drawn uniformly without replacement.  Deterministic per seed."""
    if not 0 <= missing_rate < 1:
        raise ValueError(f"missing rate must be in [0, 1), got {missing_rate}")
    total = math.prod(int(s) for s in base_shape)
    n_missing = int(round(missing_rate * total))
    if n_missing >= total:
        raise ValueError(f"missing rate {missing_rate} leaves no observed fiber")
    rng = np.random.default_rng(seed)
    observed = np.ones(total, dtype=bool)
    observed[rng.choice(total, size=n_missing, replace=False)] = False
    return FiberPattern(tuple(base_shape), observed)


def mask_apply(t, pattern):
    """Copy of ``t`` with unobserved fibers replaced by NaN."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape[:-1] != pattern.base_shape:
        raise ValueError(
            f"tensor shape {t.shape} does not extend base shape {pattern.base_shape}"
        )
    out = t.copy()
    out[~pattern.grid()] = np.nan
    return out


def assert_mask_matches(t, pattern):
    """Raise unless the NaN entries of ``t`` are exactly the unobserved fibers."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape[:-1] != pattern.base_shape:
        raise MaskMismatchError(
            f"tensor shape {t.shape} does not extend base shape {pattern.base_shape}"
        )
    nan_fibers = np.isnan(t).any(axis=-1)
    full_nan_fibers = np.isnan(t).all(axis=-1)
    if not np.array_equal(nan_fibers, full_nan_fibers):
        raise MaskMismatchError("NaN entries occur outside whole-fiber blocks")
    if not np.array_equal(nan_fibers, ~pattern.grid()):
        raise MaskMismatchError("NaN fibers disagree with the observation pattern")
