"""CSR sparse matrices and the bipartite-graph builders used by propagation.

The matrix type is a thin immutable CSR container; products delegate to
scipy's CSR kernels, which accumulate per row in ascending column order,
so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class SparseMatrix:
    """Canonical CSR: sorted, deduplicated column indices per row.

    Explicit zeros are allowed (top-K graphs may store a kept neighbor
    whose similarity is exactly zero).
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray  # int64, len n_rows+1
    col_indices: np.ndarray  # int64
    values: np.ndarray       # float64
    _transpose: "SparseMatrix | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.row_offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if len(self.row_offsets) != self.n_rows + 1:
            raise ValueError("row_offsets length must be n_rows + 1")
        if len(self.col_indices) != len(self.values) or len(self.values) != self.row_offsets[-1]:
            raise ValueError("index/value arrays inconsistent with row_offsets")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sparse matrix contains non-finite values")

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def to_scipy(self) -> sp.csr_matrix:
        m = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.n_rows, self.n_cols),
        )
        m.has_sorted_indices = True
        return m

    @classmethod
    def from_scipy(cls, m: sp.spmatrix) -> "SparseMatrix":
        m = m.tocsr()
        m.sort_indices()
        return cls(
            n_rows=m.shape[0],
            n_cols=m.shape[1],
            row_offsets=m.indptr.astype(np.int64),
            col_indices=m.indices.astype(np.int64),
            values=m.data.astype(np.float64),
        )

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        for r in range(self.n_rows):
            lo, hi = self.row_offsets[r], self.row_offsets[r + 1]
            out[r, self.col_indices[lo:hi]] = self.values[lo:hi]
        return out

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.to_scipy().sum(axis=1)).ravel()

    def matmul_dense(self, x: np.ndarray) -> np.ndarray:
        if self.n_cols != x.shape[0]:
            raise ValueError(
                f"shape mismatch: ({self.n_rows}x{self.n_cols}) @ {x.shape}"
            )
        return self.to_scipy() @ x

    def transpose(self) -> "SparseMatrix":
        if self._transpose is None:
            t = SparseMatrix.from_scipy(self.to_scipy().T.tocsr())
            self._transpose = t
        return self._transpose


def csr_from_coo(entries, shape: tuple[int, int]) -> SparseMatrix:
    """Build canonical CSR from (row, col, value) triples; duplicates sum."""
    rows = np.array([e[0] for e in entries], dtype=np.int64)
    cols = np.array([e[1] for e in entries], dtype=np.int64)
    vals = np.array([e[2] for e in entries], dtype=np.float64)
    n_rows, n_cols = shape
    if len(rows) and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
        raise ValueError("entry index out of range for shape")
    m = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return SparseMatrix.from_scipy(m)


def spmm(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product with fixed per-row accumulation order."""
    return a.matmul_dense(np.asarray(x))


def build_interaction_matrix(split) -> SparseMatrix:
    """Binary |U| x |I| matrix over the split's train edges."""
    base = split.base
    train = split.train_edges()
    entries = [(int(u), int(i), 1.0) for u, i in train]
    return csr_from_coo(entries, (base.n_users, base.n_items))


def row_normalize(m: SparseMatrix) -> SparseMatrix:
    """Divide each row by its sum; zero rows stay zero."""
    rowsum = m.row_sums()
    with np.errstate(divide="ignore"):
        inv = np.where(rowsum != 0.0, 1.0 / rowsum, 0.0)
    row_of = np.repeat(np.arange(m.n_rows), np.diff(m.row_offsets))
    return SparseMatrix(
        n_rows=m.n_rows,
        n_cols=m.n_cols,
        row_offsets=m.row_offsets.copy(),
        col_indices=m.col_indices.copy(),
        values=m.values * inv[row_of],
    )


def build_norm_adjacency(r: SparseMatrix) -> SparseMatrix:
    """Symmetric-normalized bipartite adjacency D^{-1/2} A D^{-1/2}.

    Node order: users then items. Zero-degree nodes get zero rows
    (the 1/sqrt(0) -> 0 convention keeps propagation finite).
    """
    n_u, n_i = r.n_rows, r.n_cols
    rs = r.to_scipy()
    deg_u = np.asarray(rs.sum(axis=1)).ravel()
    deg_i = np.asarray(rs.sum(axis=0)).ravel()
    with np.errstate(divide="ignore"):
        inv_u = np.where(deg_u > 0, 1.0 / np.sqrt(deg_u), 0.0)
        inv_i = np.where(deg_i > 0, 1.0 / np.sqrt(deg_i), 0.0)
    norm = sp.diags(inv_u) @ rs @ sp.diags(inv_i)
    n = n_u + n_i
    upper = sp.hstack([sp.csr_matrix((n_u, n_u)), norm])
    lower = sp.hstack([norm.T, sp.csr_matrix((n_i, n_i))])
    return SparseMatrix.from_scipy(sp.vstack([upper, lower]).tocsr())
