"""Per-modality item-item affinity graphs.

Cosine similarity over raw pre-extracted features, exact row-wise top-K
sparsification (diagonal excluded, ties broken toward smaller column
index), then symmetric degree normalization. Graphs are built once from
the raw features and frozen for the whole run.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FeatureMatrix
from .sparse import SparseMatrix

SGAD_MAGIC = b"SGAD"
SGAD_VERSION = 1

_BLOCK = 1024  # row block size for the O(n^2 d) similarity pass


@dataclass
class ModalityGraph:
    modality: str
    adjacency: SparseMatrix  # n_items x n_items, frozen


def cosine_topk(features: FeatureMatrix, k: int) -> SparseMatrix:
    """Keep each row's K most cosine-similar other items.

    Kept values are the raw cosines (explicit zeros included); ties are
    resolved toward the smaller column index.
    """
    f = features.data
    n = f.shape[0]
    if k < 1 or k >= n:
        raise ValueError(f"top-K must satisfy 1 <= K < n_items, got K={k}, n={n}")
    norms = np.linalg.norm(f, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if len(zero):
        raise ValueError(f"zero-norm feature row for item {int(zero[0])} ({features.modality})")
    fn = f / norms[:, None]

    indptr = np.arange(0, (n + 1) * k, k, dtype=np.int64)
    indices = np.empty(n * k, dtype=np.int64)
    values = np.empty(n * k, dtype=np.float64)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        sims = fn[start:stop] @ fn.T
        sims[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        # stable sort on -sims: equal similarities keep ascending column order
        top = np.argsort(-sims, axis=1, kind="stable")[:, :k]
        top.sort(axis=1)
        rows = np.arange(stop - start)[:, None]
        indices[start * k : stop * k] = top.ravel()
        values[start * k : stop * k] = sims[rows, top].ravel()
    return SparseMatrix(
        n_rows=n, n_cols=n, row_offsets=indptr, col_indices=indices, values=values
    )


def sym_normalize(s: SparseMatrix) -> SparseMatrix:
    """Scale entry (i,j) by 1/sqrt(rowsum_i * rowsum_j); zero row sums
    map to zero rows rather than dividing by zero."""
    if len(s.values) and s.values.min() < 0.0:
        raise ValueError("sym_normalize requires nonnegative entries")
    rowsum = s.row_sums()
    with np.errstate(divide="ignore"):
        inv = np.where(rowsum > 0.0, 1.0 / np.sqrt(rowsum), 0.0)
    row_of = np.repeat(np.arange(s.n_rows), np.diff(s.row_offsets))
    values = s.values * inv[row_of] * inv[s.col_indices]
    return SparseMatrix(
        n_rows=s.n_rows,
        n_cols=s.n_cols,
        row_offsets=s.row_offsets.copy(),
        col_indices=s.col_indices.copy(),
        values=values,
    )


def build_modality_graph(features: FeatureMatrix, k: int) -> ModalityGraph:
    return ModalityGraph(
        modality=features.modality,
        adjacency=sym_normalize(cosine_topk(features, k)),
    )


# ---------------------------------------------------------------------------
# on-disk cache (optional): keyed by dataset content hash, modality, K


def feature_hash(features: FeatureMatrix) -> str:
    h = hashlib.sha256()
    h.update(features.modality.encode())
    h.update(np.ascontiguousarray(features.data).tobytes())
    return h.hexdigest()[:16]


def cache_path(cache_dir: str | Path, features: FeatureMatrix, k: int) -> Path:
    return Path(cache_dir) / f"graph_{features.modality}_k{k}_{feature_hash(features)}.sgad"


def save_graph(path: str | Path, graph: ModalityGraph) -> None:
    adj = graph.adjacency
    with open(path, "wb") as fh:
        fh.write(SGAD_MAGIC)
        fh.write(struct.pack("<IIQ", SGAD_VERSION, adj.n_rows, adj.nnz))
        fh.write(adj.row_offsets.astype("<u8").tobytes())
        fh.write(adj.col_indices.astype("<u4").tobytes())
        fh.write(adj.values.astype("<f8").tobytes())


def load_graph(path: str | Path, modality: str) -> ModalityGraph:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SGAD_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        version, n, nnz = struct.unpack("<IIQ", fh.read(16))
        if version != SGAD_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        indptr = np.frombuffer(fh.read(8 * (n + 1)), dtype="<u8").astype(np.int64)
        indices = np.frombuffer(fh.read(4 * nnz), dtype="<u4").astype(np.int64)
        values = np.frombuffer(fh.read(8 * nnz), dtype="<f8").astype(np.float64)
    adj = SparseMatrix(
        n_rows=n, n_cols=n, row_offsets=indptr, col_indices=indices, values=values
    )
    return ModalityGraph(modality=modality, adjacency=adj)


def build_or_load_graph(
    features: FeatureMatrix, k: int, cache_dir: str | Path | None = None
) -> ModalityGraph:
    if cache_dir is None:
        return build_modality_graph(features, k)
    path = cache_path(cache_dir, features, k)
    if path.exists():
        return load_graph(path, features.modality)
    graph = build_modality_graph(features, k)
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    save_graph(path, graph)
    return graph
