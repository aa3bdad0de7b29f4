"""CSR construction, sparse-dense products, and graph builders against
dense oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synergraph.sparse import (
    SparseMatrix,
    build_interaction_matrix,
    build_norm_adjacency,
    csr_from_coo,
    row_normalize,
    spmm,
)


def dense_from_entries(entries, shape):
    out = np.zeros(shape)
    for r, c, v in entries:
        out[r, c] += v
    return out


def test_csr_single_entry():
    m = csr_from_coo([(0, 0, 1.0)], (1, 1))
    assert m.to_dense().tolist() == [[1.0]]


def test_csr_duplicates_sum():
    m = csr_from_coo([(0, 1, 1.0), (0, 1, 2.0)], (1, 2))
    assert m.to_dense()[0, 1] == 3.0
    assert m.nnz == 1


def test_csr_out_of_range():
    with pytest.raises(ValueError):
        csr_from_coo([(0, 5, 1.0)], (1, 2))


@settings(max_examples=50, deadline=None)
@given(st.lists(
    st.tuples(st.integers(0, 4), st.integers(0, 4),
              st.floats(-5, 5, allow_nan=False)),
    min_size=0, max_size=20,
))
def test_csr_roundtrip_matches_dense(entries):
    m = csr_from_coo(entries, (5, 5))
    np.testing.assert_allclose(m.to_dense(), dense_from_entries(entries, (5, 5)), atol=1e-12)


def test_csr_canonical_recanonicalize_noop():
    m = csr_from_coo([(1, 3, 2.0), (0, 0, 1.0), (1, 1, -4.0)], (3, 4))
    again = SparseMatrix.from_scipy(m.to_scipy())
    np.testing.assert_array_equal(m.row_offsets, again.row_offsets)
    np.testing.assert_array_equal(m.col_indices, again.col_indices)
    np.testing.assert_array_equal(m.values, again.values)


def test_spmm_identity_and_zero():
    eye = csr_from_coo([(i, i, 1.0) for i in range(3)], (3, 3))
    x = np.arange(6.0).reshape(3, 2)
    np.testing.assert_allclose(spmm(eye, x), x)
    zero = csr_from_coo([], (3, 3))
    np.testing.assert_allclose(spmm(zero, x), np.zeros((3, 2)))


def test_spmm_permutation_example():
    m = csr_from_coo([(0, 1, 1.0), (1, 0, 1.0)], (2, 2))
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(spmm(m, x), [[3.0, 4.0], [1.0, 2.0]])


def test_spmm_shape_mismatch():
    m = csr_from_coo([(0, 0, 1.0)], (2, 2))
    with pytest.raises(ValueError):
        spmm(m, np.zeros((3, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_spmm_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    rows, cols, k = rng.integers(1, 20, size=3)
    mask = rng.random((rows, cols)) < 0.3
    dense = np.where(mask, rng.normal(size=(rows, cols)), 0.0)
    entries = [(r, c, dense[r, c]) for r in range(rows) for c in range(cols) if mask[r, c]]
    m = csr_from_coo(entries, (int(rows), int(cols)))
    x = rng.normal(size=(int(cols), int(k)))
    np.testing.assert_allclose(spmm(m, x), dense @ x, atol=1e-6)


def test_build_interaction_matrix_train_only(small_split):
    r = build_interaction_matrix(small_split)
    train = small_split.train_edges()
    assert r.nnz == len(train)
    dense = r.to_dense()
    for u, i in train:
        assert dense[u, i] == 1.0
    for u, i in small_split.val_edges():
        assert dense[u, i] == 0.0


def test_norm_adjacency_single_edge():
    r = csr_from_coo([(0, 0, 1.0)], (1, 1))
    adj = build_norm_adjacency(r)
    np.testing.assert_allclose(adj.to_dense(), [[0.0, 1.0], [1.0, 0.0]])


def test_norm_adjacency_shared_item():
    # two users on one item: entry = 1/sqrt(1*2)
    r = csr_from_coo([(0, 0, 1.0), (1, 0, 1.0)], (2, 1))
    adj = build_norm_adjacency(r).to_dense()
    assert adj[0, 2] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)
    assert adj[1, 2] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)


def _random_bipartite(rng, max_users=10, max_items=10):
    n_u = int(rng.integers(1, max_users + 1))
    n_i = int(rng.integers(1, max_items + 1))
    mask = rng.random((n_u, n_i)) < 0.4
    entries = [(u, i, 1.0) for u in range(n_u) for i in range(n_i) if mask[u, i]]
    return csr_from_coo(entries, (n_u, n_i)), mask.astype(float)


def _dense_norm_adjacency(mask):
    n_u, n_i = mask.shape
    a = np.zeros((n_u + n_i, n_u + n_i))
    a[:n_u, n_u:] = mask
    a[n_u:, :n_u] = mask.T
    deg = a.sum(axis=1)
    with np.errstate(divide="ignore"):
        inv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    return inv[:, None] * a * inv[None, :]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_norm_adjacency_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    r, mask = _random_bipartite(rng)
    adj = build_norm_adjacency(r).to_dense()
    np.testing.assert_allclose(adj, _dense_norm_adjacency(mask), atol=1e-9)
    np.testing.assert_allclose(adj, adj.T, atol=0)
    vals = adj[adj != 0]
    if len(vals):
        assert vals.min() > 0.0 and vals.max() <= 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_norm_adjacency_degree_identity(seed):
    # sum_c L[r,c] * sqrt(deg(c)) == sqrt(deg(r))
    rng = np.random.default_rng(seed)
    r, mask = _random_bipartite(rng)
    adj = build_norm_adjacency(r).to_dense()
    n_u, n_i = mask.shape
    deg = np.concatenate([mask.sum(axis=1), mask.sum(axis=0)])
    lhs = adj @ np.sqrt(deg)
    np.testing.assert_allclose(lhs, np.sqrt(deg), atol=1e-9)


def test_row_normalize():
    m = csr_from_coo([(0, 0, 2.0), (0, 1, 2.0), (2, 1, 5.0)], (3, 2))
    rn = row_normalize(m).to_dense()
    np.testing.assert_allclose(rn, [[0.5, 0.5], [0.0, 0.0], [0.0, 1.0]])


def test_transpose_cached_and_correct():
    m = csr_from_coo([(0, 1, 2.0), (2, 0, 3.0)], (3, 2))
    t = m.transpose()
    np.testing.assert_allclose(t.to_dense(), m.to_dense().T)
    assert m.transpose() is t
