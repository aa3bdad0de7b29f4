"""Item-item modality graphs: exact top-K cosine against dense oracles,
normalization, and the frozen-graph contract."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synergraph.data import FeatureMatrix, synth_dataset
from synergraph.graphs import (
    build_modality_graph,
    build_or_load_graph,
    cosine_topk,
    load_graph,
    save_graph,
    sym_normalize,
)
from synergraph.sparse import csr_from_coo


def dense_cosine(f):
    norms = np.linalg.norm(f, axis=1, keepdims=True)
    fn = f / norms
    return fn @ fn.T


def oracle_topk(f, k):
    """Unvectorized reference: per row keep the k largest off-diagonal
    cosines, ties toward smaller column index."""
    n = f.shape[0]
    sims = dense_cosine(f)
    out = np.zeros((n, n))
    for i in range(n):
        cands = [(-sims[i, j], j) for j in range(n) if j != i]
        cands.sort()
        for _negs, j in cands[:k]:
            out[i, j] = sims[i, j]
    return out


def test_topk_spec_example():
    f = FeatureMatrix("visual", np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
    m = cosine_topk(f, 1).to_dense()
    want = np.zeros((3, 3))
    want[0, 2] = 1.0
    want[2, 0] = 1.0
    want[1, 0] = 0.0  # tie between columns 0 and 2 resolved to 0, value 0
    np.testing.assert_allclose(m, want, atol=1e-12)
    # row 1 stores an explicit zero at column 0
    g = cosine_topk(f, 1)
    assert g.col_indices[g.row_offsets[1]] == 0


def test_topk_identical_rows():
    f = FeatureMatrix("visual", np.ones((4, 3)))
    m = cosine_topk(f, 1).to_dense()
    assert (m.sum(axis=1) == pytest.approx(1.0))
    assert np.count_nonzero(m) == 4


def test_topk_full_k_is_dense_minus_diagonal():
    rng = np.random.default_rng(0)
    f = rng.uniform(0.1, 1.0, size=(6, 4))
    m = cosine_topk(FeatureMatrix("visual", f), 5).to_dense()
    want = dense_cosine(f)
    np.fill_diagonal(want, 0.0)
    np.testing.assert_allclose(m, want, atol=1e-12)


def test_topk_zero_row_rejected():
    f = FeatureMatrix("textual", np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="item 1"):
        cosine_topk(f, 1)


def test_topk_k_out_of_range():
    f = FeatureMatrix("textual", np.ones((3, 2)))
    for k in (0, 3):
        with pytest.raises(ValueError):
            cosine_topk(f, k)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_topk_matches_dense_oracle(seed, k):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(k + 1, 30))
    f = rng.uniform(0.05, 1.0, size=(n, 5))
    got = cosine_topk(FeatureMatrix("visual", f), k).to_dense()
    np.testing.assert_allclose(got, oracle_topk(f, k), atol=1e-6)


def test_topk_blocked_path_matches(monkeypatch):
    import synergraph.graphs as G

    rng = np.random.default_rng(5)
    f = rng.uniform(0.05, 1.0, size=(50, 4))
    full = cosine_topk(FeatureMatrix("visual", f), 7).to_dense()
    monkeypatch.setattr(G, "_BLOCK", 16)
    blocked = cosine_topk(FeatureMatrix("visual", f), 7).to_dense()
    # BLAS may differ in the last ulp between block shapes
    np.testing.assert_allclose(blocked, full, atol=1e-12)


def test_sym_normalize_examples():
    m = csr_from_coo([(0, 1, 2.0), (1, 0, 2.0)], (2, 2))
    np.testing.assert_allclose(sym_normalize(m).to_dense(), [[0, 1], [1, 0]], atol=1e-12)
    unit = csr_from_coo([(0, 1, 1.0), (1, 0, 1.0)], (2, 2))
    np.testing.assert_allclose(sym_normalize(unit).to_dense(), unit.to_dense())


def test_sym_normalize_zero_row_no_nan():
    m = csr_from_coo([(0, 1, 3.0)], (3, 3))
    out = sym_normalize(m).to_dense()
    assert np.isfinite(out).all()
    assert out[1].sum() == 0.0 and out[2].sum() == 0.0


def test_sym_normalize_rejects_negative():
    m = csr_from_coo([(0, 1, -0.5)], (2, 2))
    with pytest.raises(ValueError, match="nonnegative"):
        sym_normalize(m)


def test_build_graph_two_items_mutual_edge():
    f = FeatureMatrix("visual", np.array([[1.0, 1.0], [2.0, 2.0]]))
    g = build_modality_graph(f, 1)
    np.testing.assert_allclose(g.adjacency.to_dense(), [[0, 1], [1, 0]], atol=1e-12)


def test_build_graph_nnz_bound_and_range():
    _ds, fv, _ft = synth_dataset(20, 30, 5, 6, 6, seed=2)
    g = build_modality_graph(fv, 4)
    adj = g.adjacency
    assert adj.nnz <= 4 * 30
    assert adj.values.min() >= 0.0 and adj.values.max() <= 1.0 + 1e-12
    counts = np.diff(adj.row_offsets)
    assert counts.max() <= 4


def test_build_graph_frozen_rebuild_identical():
    _ds, fv, _ft = synth_dataset(10, 15, 4, 5, 5, seed=3)
    g1 = build_modality_graph(fv, 3)
    g2 = build_modality_graph(fv, 3)
    np.testing.assert_array_equal(g1.adjacency.values, g2.adjacency.values)
    np.testing.assert_array_equal(g1.adjacency.col_indices, g2.adjacency.col_indices)


def test_build_graph_cluster_mass():
    _ds, fv, _ft = synth_dataset(50, 40, 5, 8, 8, seed=1)
    g = build_modality_graph(fv, 5)
    adj = g.adjacency
    cluster = np.arange(40) % 4
    within = across = 0.0
    for i in range(40):
        lo, hi = adj.row_offsets[i], adj.row_offsets[i + 1]
        for j, v in zip(adj.col_indices[lo:hi], adj.values[lo:hi]):
            if cluster[i] == cluster[j]:
                within += v
            else:
                across += v
    assert within > across


def test_sgad_cache_roundtrip(tmp_path):
    _ds, fv, _ft = synth_dataset(10, 12, 4, 5, 5, seed=4)
    g = build_modality_graph(fv, 3)
    path = tmp_path / "g.sgad"
    save_graph(path, g)
    loaded = load_graph(path, "visual")
    np.testing.assert_array_equal(loaded.adjacency.values, g.adjacency.values)
    np.testing.assert_array_equal(loaded.adjacency.col_indices, g.adjacency.col_indices)
    np.testing.assert_array_equal(loaded.adjacency.row_offsets, g.adjacency.row_offsets)


def test_build_or_load_uses_cache(tmp_path):
    _ds, fv, _ft = synth_dataset(10, 12, 4, 5, 5, seed=4)
    g1 = build_or_load_graph(fv, 3, cache_dir=tmp_path)
    files = list(tmp_path.glob("*.sgad"))
    assert len(files) == 1
    g2 = build_or_load_graph(fv, 3, cache_dir=tmp_path)
    np.testing.assert_array_equal(g1.adjacency.values, g2.adjacency.values)
