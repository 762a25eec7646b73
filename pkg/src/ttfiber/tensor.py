"""Dense tensor index bookkeeping and tensor-train evaluation.

Every linearization in this package is first-index-fastest: entry
(i_1, ..., i_N) of a tensor with shape (I_1, ..., I_N) sits at flat offset
i_1 + I_1*i_2 + I_1*I_2*i_3 + ... (0-based).  That is numpy's Fortran order,
so unfolding, folding and the three-way reshaping are pure ``order="F"``
reshapes of the same buffer.  Arrays of any memory layout are accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _as_tensor(t):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1:
        raise ValueError("tensor must have at least one mode")
    return t


def unfold(t, split):
    """Matricize ``t`` with the first ``split`` modes as rows.

    Row r linearizes (i_1, ..., i_split) first-index-fastest and column c
    linearizes the remaining indices the same way.
    """
    t = _as_tensor(t)
    if not 1 <= split <= t.ndim - 1:
        raise ValueError(f"split must be in [1, {t.ndim - 1}], got {split}")
    rows = math.prod(t.shape[:split])
    return t.reshape(rows, -1, order="F")


def fold(mat, shape):
    """Exact inverse of :func:`unfold` for any valid split."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.size != math.prod(shape):
        raise ValueError(f"cannot fold {mat.size} entries into shape {tuple(shape)}")
    return mat.reshape(tuple(shape), order="F")


def reshape3(t, split):
    """Relabel ``t`` as a third-order tensor (prod I_1..n, prod I_n+1..N-1, I_N).

    Pure reshape: no data movement.  Mode-2 slice l holds the columns of
    ``unfold(t, split)`` whose trailing column index block equals l, i.e.
    ``reshape3(t, n)[:, l, k] == unfold(t, n)[:, l + L*k]`` with
    L the mode-2 extent.
    """
    t = _as_tensor(t)
    if not 1 <= split <= t.ndim - 2:
        raise ValueError(f"split must be in [1, {t.ndim - 2}], got {split}")
    rows = math.prod(t.shape[:split])
    mid = math.prod(t.shape[split:-1])
    return t.reshape(rows, mid, t.shape[-1], order="F")


@dataclass(frozen=True)
class TensorTrain:
    """A chain of order-3 cores; core n has shape (R_{n-1}, I_n, R_n).

    Boundary ranks are 1 and adjacent cores agree on the shared rank.  Cores
    are stored as float64 arrays and treated as immutable once constructed,
    so instances are safe to share across threads.
    """

    cores: tuple

    def __post_init__(self):
        cores = tuple(np.asarray(c, dtype=np.float64) for c in self.cores)
        if len(cores) < 2:
            raise ValueError("a tensor train needs at least two cores")
        for n, core in enumerate(cores):
            if core.ndim != 3:
                raise ValueError(f"core {n} must be order-3, got shape {core.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must both be 1")
        for n in range(len(cores) - 1):
            if cores[n].shape[2] != cores[n + 1].shape[0]:
                raise ValueError(
                    f"cores {n} and {n + 1} disagree on the shared rank: "
                    f"{cores[n].shape[2]} vs {cores[n + 1].shape[0]}"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def ranks(self):
        """(R_0, ..., R_N) with R_0 = R_N = 1."""
        return (1,) + tuple(core.shape[2] for core in self.cores)

    @property
    def shape(self):
        return tuple(core.shape[1] for core in self.cores)

    @property
    def storage_size(self):
        """Total number of stored core entries, sum of R_{n-1}*I_n*R_n."""
        return sum(core.size for core in self.cores)

    def __len__(self):
        return len(self.cores)


def tt_entry(tt, idx):
    """Evaluate one tensor entry as the left-to-right product of core slices."""
    idx = tuple(int(i) for i in idx)
    if len(idx) != len(tt):
        raise IndexError(f"expected {len(tt)} indices, got {len(idx)}")
    for i, (ind, size) in enumerate(zip(idx, tt.shape)):
        if not 0 <= ind < size:
            raise IndexError(f"index {ind} out of bounds for mode {i} of size {size}")
    acc = tt.cores[0][:, idx[0], :]
    for core, ind in zip(tt.cores[1:], idx[1:]):
        acc = acc @ core[:, ind, :]
    return float(acc[0, 0])


def tt_left_matrix(cores):
    """Left partial product of ``cores`` as a (prod I_n) x R matrix.

    Rows linearize the accumulated mode indices first-index-fastest.
    """
    first = np.asarray(cores[0], dtype=np.float64)
    acc = first.reshape(first.shape[0] * first.shape[1], first.shape[2], order="F")
    if first.shape[0] != 1:
        raise ValueError("left partial products start at the first core")
    for core in cores[1:]:
        r0, size, r1 = core.shape
        acc = acc @ core.reshape(r0, size * r1, order="F")
        acc = acc.reshape(-1, r1, order="F")
    return acc


def tt_to_dense(tt):
    """Contract all cores into the dense tensor, left to right."""
    mat = tt_left_matrix(tt.cores)
    return mat.reshape(tt.shape, order="F")
