"""Piecewise column-space estimation: both estimators and their diagnostics."""

import numpy as np
import pytest

import ttfiber.subspace as sub
from ttfiber import (
    IdentifiabilityError,
    ObservedSubmatrix,
    combine_slice_pairs,
    constraint_basis,
    intersection_basis,
    principal_angles,
    truncated_svd,
)

TARGET = np.array([1.0, 2.0, 3.0]) / np.sqrt(14.0)


def rank1_example_pieces():
    # rank-1 matrix [[1,2],[2,4],[3,6]] with the (3,1) and (1,2) entries
    # unobserved: piece 1 holds rows {0,1} of column 0, piece 2 rows {1,2}
    # of column 1.
    return [
        ObservedSubmatrix(np.array([0, 1]), np.array([[1.0], [2.0]]), source=0),
        ObservedSubmatrix(np.array([1, 2]), np.array([[4.0], [6.0]]), source=1),
    ]


def test_rank1_example_constraint():
    est = constraint_basis(rank1_example_pieces(), 3, 1)
    assert principal_angles(est.basis, TARGET[:, None]).max() <= 1e-12
    assert est.n_used == 2 and est.gap > 1e6


def test_rank1_example_intersection():
    est = intersection_basis(rank1_example_pieces(), 3, 1)
    assert principal_angles(est.basis, TARGET[:, None]).max() <= 1e-12
    # oracle: the hand-built stacked basis has top singular value sqrt(2)
    # because the shared direction lies in both completion spaces
    q1 = np.column_stack([np.array([1.0, 2.0, 0.0]) / np.sqrt(5.0), [0.0, 0.0, 1.0]])
    q2 = np.column_stack([np.array([0.0, 4.0, 6.0]) / np.sqrt(52.0), [1.0, 0.0, 0.0]])
    svals = np.linalg.svd(np.hstack([q1, q2]), compute_uv=False)
    assert abs(svals[0] - np.sqrt(2.0)) <= 1e-12
    assert abs(est.gap - (svals[0] - svals[1])) <= 1e-10


def test_single_full_piece_reduces_to_plain_svd():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((9, 3)) @ rng.standard_normal((3, 7))
    piece = [ObservedSubmatrix(np.arange(9), m, source=0)]
    lead = truncated_svd(m, 3).U
    for method in (constraint_basis, intersection_basis):
        est = method(piece, 9, 3)
        assert principal_angles(est.basis, lead).max() <= 1e-12


def overlapping_blocks(m, block, stride):
    """Row blocks of fixed size covering all rows, final block right-aligned."""
    n_rows = m.shape[0]
    starts = list(range(0, n_rows - block + 1, stride))
    if starts[-1] != n_rows - block:
        starts.append(n_rows - block)
    return [
        ObservedSubmatrix(np.arange(s, s + block), m[s:s + block], source=i)
        for i, s in enumerate(starts)
    ]


def test_recovery_from_row_blocks():
    rng = np.random.default_rng(1)
    truth = np.linalg.qr(rng.standard_normal((60, 3)))[0]
    m = truth @ rng.standard_normal((3, 20))
    pieces = overlapping_blocks(m, block=8, stride=5)
    assert len(pieces) == 12
    for method in (constraint_basis, intersection_basis):
        est = method(pieces, 60, 3)
        assert principal_angles(est.basis, truth).max() <= 1e-9


def test_methods_agree_on_random_instances():
    rng = np.random.default_rng(2)
    for trial in range(5):
        n_rows, rank = 40, 2 + trial % 3
        m = rng.standard_normal((n_rows, rank)) @ rng.standard_normal((rank, 25))
        pieces = overlapping_blocks(m, block=rank + 4, stride=3)
        a = constraint_basis(pieces, n_rows, rank)
        b = intersection_basis(pieces, n_rows, rank)
        assert principal_angles(a.basis, b.basis).max() <= 1e-9


def test_basis_invariances():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 18))
    pieces = overlapping_blocks(m, block=6, stride=3)

    scaled = [
        ObservedSubmatrix(p.alpha, p.values * rng.uniform(0.5, 2.0, p.values.shape[1]), p.source)
        for p in pieces
    ]
    permuted = [
        ObservedSubmatrix(p.alpha, p.values[:, rng.permutation(p.values.shape[1])], p.source)
        for p in pieces
    ]
    for method in (constraint_basis, intersection_basis):
        base = method(pieces, 30, 2).basis
        assert principal_angles(base, method(pieces[::-1], 30, 2).basis).max() <= 1e-10
        assert principal_angles(base, method(scaled, 30, 2).basis).max() <= 1e-10
        assert principal_angles(base, method(permuted, 30, 2).basis).max() <= 1e-10


def test_gap_collapses_toward_violation():
    rng = np.random.default_rng(4)
    clean = rng.standard_normal((24, 2)) @ rng.standard_normal((2, 30))
    # tiny noise keeps the constraint gap's denominator off the roundoff
    # floor so the ratio is a measurable margin rather than 1/eps
    m = clean + 1e-8 * rng.standard_normal(clean.shape)
    rich = overlapping_blocks(m, block=8, stride=2)
    # keep a sparser but still covering and connected chain
    sparse = rich[::2]
    for method in (constraint_basis, intersection_basis):
        g_rich = method(rich, 24, 2).gap
        g_sparse = method(sparse, 24, 2).gap
        assert g_rich > 0 and g_sparse > 0
        assert g_sparse <= g_rich


def test_skip_warning_for_small_pieces():
    pieces = rank1_example_pieces() + [
        ObservedSubmatrix(np.array([2]), np.array([[6.0]]), source=9)
    ]
    with pytest.warns(UserWarning, match="skipped 1"):
        est = constraint_basis(pieces, 3, 1)
    assert est.n_skipped == 1
    assert principal_angles(est.basis, TARGET[:, None]).max() <= 1e-12


def test_uncovered_rows_raise():
    pieces = [ObservedSubmatrix(np.array([0, 1]), np.array([[1.0], [2.0]]), source=0)]
    for method in (constraint_basis, intersection_basis):
        with pytest.raises(IdentifiabilityError, match="no usable"):
            method(pieces, 3, 1)


def test_too_few_constraints_raise():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((10, 2)) @ rng.standard_normal((2, 8))
    pieces = [
        ObservedSubmatrix(np.arange(0, 3), m[0:3], source=0),
        ObservedSubmatrix(np.arange(2, 5), m[2:5], source=1),
        ObservedSubmatrix(np.arange(4, 10), m[4:10], source=2),
    ]
    # constraints: (3-2)+(3-2)+(6-2)=6 < 10-2=8
    with pytest.raises(IdentifiabilityError, match="constraints"):
        constraint_basis(pieces, 10, 2)


def test_disconnected_groups_raise():
    rng = np.random.default_rng(6)
    m = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 30))
    pieces = [
        ObservedSubmatrix(np.arange(0, 3), m[0:3, k:k + 3], source=k) for k in range(0, 12, 3)
    ] + [
        ObservedSubmatrix(np.arange(3, 6), m[3:6, k:k + 3], source=k) for k in range(12, 30, 3)
    ]
    for method in (constraint_basis, intersection_basis):
        with pytest.raises(IdentifiabilityError, match="not informationally complete"):
            method(pieces, 6, 2)


def test_all_pieces_too_small_raise():
    pieces = [ObservedSubmatrix(np.array([i]), np.array([[1.0]]), source=i) for i in range(3)]
    with pytest.warns(UserWarning):
        with pytest.raises(IdentifiabilityError, match="unconstrained"):
            constraint_basis(pieces, 3, 1)


def test_full_rank_shortcut():
    est = intersection_basis([], 4, 4)
    assert np.array_equal(est.basis, np.eye(4))


def test_combine_slice_pairs():
    a = ObservedSubmatrix(np.array([0, 1, 2]), np.ones((3, 4)), source=0)
    b = ObservedSubmatrix(np.array([3, 4]), np.ones((2, 4)), source=1)
    assert combine_slice_pairs([a, b], 1) == []

    c = ObservedSubmatrix(np.array([0, 1, 2]), 2 * np.ones((3, 4)), source=2)
    merged = combine_slice_pairs([a, c], 2)
    assert len(merged) == 1
    assert np.array_equal(merged[0].alpha, [0, 1, 2])
    assert merged[0].values.shape == (3, 8)
    assert merged[0].source == (0, 2)

    d = ObservedSubmatrix(np.array([1, 2, 3]), np.ones((3, 4)), source=3)
    merged = combine_slice_pairs([a, d], 2)
    assert len(merged) == 1
    assert np.array_equal(merged[0].alpha, [1, 2])
    assert merged[0].values.shape == (2, 8)


def test_pair_values_align_with_rows():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((6, 8))
    a = ObservedSubmatrix(np.array([0, 2, 4]), m[[0, 2, 4]][:, :4], source=0)
    b = ObservedSubmatrix(np.array([2, 3, 4]), m[[2, 3, 4]][:, 4:], source=1)
    merged = combine_slice_pairs([a, b], 2)[0]
    assert np.array_equal(merged.alpha, [2, 4])
    assert np.array_equal(merged.values, np.hstack([m[[2, 4]][:, :4], m[[2, 4]][:, 4:]]))


@pytest.mark.parametrize("method", [constraint_basis, intersection_basis])
def test_direct_and_gram_routes_agree(method, monkeypatch):
    rng = np.random.default_rng(8)
    truth = np.linalg.qr(rng.standard_normal((80, 3)))[0]
    m = truth @ rng.standard_normal((3, 40))
    pieces = overlapping_blocks(m, block=9, stride=4)

    direct = method(pieces, 80, 3)
    monkeypatch.setattr(sub, "DIRECT_SVD_MAX_DIM", 0)
    dense = method(pieces, 80, 3)
    monkeypatch.setattr(sub, "DENSE_EIG_MAX_DIM", 0)
    iterative = method(pieces, 80, 3)

    for est in (dense, iterative):
        assert principal_angles(direct.basis, est.basis).max() <= 1e-9
        assert principal_angles(est.basis, truth).max() <= 1e-9
    # noiseless gaps all signal a wide margin; the constraint ratio sits on a
    # roundoff-scale denominator so only its magnitude is meaningful
    if method is constraint_basis:
        assert min(direct.gap, dense.gap, iterative.gap) > 1e4
    else:
        assert np.isclose(dense.gap, iterative.gap, rtol=1e-6)
        assert np.isclose(direct.gap, dense.gap, rtol=1e-6)


def test_gram_route_detects_disconnection(monkeypatch):
    monkeypatch.setattr(sub, "DIRECT_SVD_MAX_DIM", 0)
    rng = np.random.default_rng(9)
    m = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 30))
    pieces = [
        ObservedSubmatrix(np.arange(0, 3), m[0:3, k:k + 3], source=k) for k in range(0, 12, 3)
    ] + [
        ObservedSubmatrix(np.arange(3, 6), m[3:6, k:k + 3], source=k) for k in range(12, 30, 3)
    ]
    for method in (constraint_basis, intersection_basis):
        with pytest.raises(IdentifiabilityError, match="not informationally complete"):
            method(pieces, 6, 2)
