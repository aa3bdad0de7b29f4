"""Interaction datasets: loading, ID encoding, splitting, synthesis, features.

File formats owned here:
  * interactions: UTF-8 TSV ``user_id<TAB>item_id[<TAB>timestamp]``, no header
  * vocabulary:   TSV ``raw_id<TAB>dense_index``
  * features:     SGFM binary (magic "SGFM", u32 version=1, u32 rows,
                  u32 cols, then rows*cols little-endian f32, row-major)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SGFM_MAGIC = b"SGFM"
SGFM_VERSION = 1

MODALITIES = ("visual", "textual")

TRAIN, VAL, TEST = 0, 1, 2


class DataError(ValueError):
    """Raised for malformed inputs or violated dataset contracts."""


@dataclass
class InteractionTable:
    """Deduplicated raw-id interaction rows (earliest timestamp kept)."""

    rows: list[tuple[str, str, int]]


@dataclass
class InteractionDataset:
    n_users: int
    n_items: int
    edges: np.ndarray  # [n_edges, 2] int64 (user, item) dense indices
    user_vocab: dict[str, int]
    item_vocab: dict[str, int]

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def sparsity(self) -> float:
        return 1.0 - self.n_edges / (self.n_users * self.n_items)

    def user_raw_ids(self) -> list[str]:
        out = [""] * self.n_users
        for raw, idx in self.user_vocab.items():
            out[idx] = raw
        return out

    def item_raw_ids(self) -> list[str]:
        out = [""] * self.n_items
        for raw, idx in self.item_vocab.items():
            out[idx] = raw
        return out


@dataclass
class SplitDataset:
    base: InteractionDataset
    assignment: np.ndarray  # int8 per edge: 0 train / 1 val / 2 test
    _user_items: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int8)

    def edges_of(self, label: int) -> np.ndarray:
        return self.base.edges[self.assignment == label]

    def train_edges(self) -> np.ndarray:
        return self.edges_of(TRAIN)

    def val_edges(self) -> np.ndarray:
        return self.edges_of(VAL)

    def test_edges(self) -> np.ndarray:
        return self.edges_of(TEST)

    def user_items(self, label: int) -> list[np.ndarray]:
        """Per-user sorted item arrays for one split label (cached)."""
        if label not in self._user_items:
            per_user: list[list[int]] = [[] for _ in range(self.base.n_users)]
            for (u, i), a in zip(self.base.edges, self.assignment):
                if a == label:
                    per_user[u].append(i)
            self._user_items[label] = [np.array(sorted(s), dtype=np.int64) for s in per_user]
        return self._user_items[label]


@dataclass
class FeatureMatrix:
    modality: str
    data: np.ndarray  # [n_items, d_m] float64

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DataError("feature matrix must be 2-D")

    @property
    def n_items(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# loading and encoding


def load_interactions(path: str | Path) -> InteractionTable:
    """Parse a TSV interactions file, collapsing duplicate (user, item)
    pairs onto the earliest timestamp."""
    path = Path(path)
    best: dict[tuple[str, str], int] = {}
    order: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2 or not parts[0] or not parts[1]:
                raise DataError(f"{path}:{lineno}: expected user<TAB>item[<TAB>timestamp]")
            user, item = parts[0], parts[1]
            if len(parts) >= 3 and parts[2] != "":
                try:
                    ts = int(parts[2])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: bad timestamp {parts[2]!r}") from exc
            else:
                ts = 0
            key = (user, item)
            if key in best:
                best[key] = min(best[key], ts)
            else:
                best[key] = ts
                order.append(key)
    if not order:
        raise DataError(f"{path}: no interactions found")
    return InteractionTable(rows=[(u, i, best[(u, i)]) for u, i in order])


def encode_ids(table: InteractionTable) -> InteractionDataset:
    """Assign dense indices in first-appearance order."""
    if not table.rows:
        raise DataError("cannot encode an empty interaction table")
    user_vocab: dict[str, int] = {}
    item_vocab: dict[str, int] = {}
    edges = np.empty((len(table.rows), 2), dtype=np.int64)
    for k, (u_raw, i_raw, _ts) in enumerate(table.rows):
        u = user_vocab.setdefault(u_raw, len(user_vocab))
        i = item_vocab.setdefault(i_raw, len(item_vocab))
        edges[k, 0] = u
        edges[k, 1] = i
    return InteractionDataset(
        n_users=len(user_vocab),
        n_items=len(item_vocab),
        edges=edges,
        user_vocab=user_vocab,
        item_vocab=item_vocab,
    )


def check_core(dataset: InteractionDataset, k: int = 5) -> bool:
    """True when every user and item has at least k interactions."""
    u_deg = np.bincount(dataset.edges[:, 0], minlength=dataset.n_users)
    i_deg = np.bincount(dataset.edges[:, 1], minlength=dataset.n_items)
    return bool(u_deg.min() >= k and i_deg.min() >= k)


def user_split(
    dataset: InteractionDataset,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 123,
) -> SplitDataset:
    """Per-user random split with floor counts and remainder to test.

    Each user's edges are shuffled with the seeded RNG and assigned
    floor(n*r_train) / floor(n*r_val) / remainder; the train share is
    forced to at least one edge.
    """
    rng = np.random.default_rng(seed)
    assignment = np.empty(dataset.n_edges, dtype=np.int8)
    by_user: list[list[int]] = [[] for _ in range(dataset.n_users)]
    for k, (u, _i) in enumerate(dataset.edges):
        by_user[u].append(k)
    for u in range(dataset.n_users):
        idx = by_user[u]
        n = len(idx)
        if n < 3:
            raise DataError(f"user {u} has only {n} interactions; need at least 3 to split")
        n_train = max(1, int(np.floor(n * ratios[0])))
        n_val = int(np.floor(n * ratios[1]))
        if n_train + n_val > n:
            n_val = n - n_train
        perm = rng.permutation(n)
        order = [idx[p] for p in perm]
        for j, e in enumerate(order):
            if j < n_train:
                assignment[e] = TRAIN
            elif j < n_train + n_val:
                assignment[e] = VAL
            else:
                assignment[e] = TEST
    return SplitDataset(base=dataset, assignment=assignment)


# ---------------------------------------------------------------------------
# SGFM feature files


def save_feature_matrix(path: str | Path, fm: FeatureMatrix) -> None:
    rows, cols = fm.data.shape
    with open(path, "wb") as fh:
        fh.write(SGFM_MAGIC)
        fh.write(struct.pack("<III", SGFM_VERSION, rows, cols))
        fh.write(fm.data.astype("<f4").tobytes(order="C"))


def load_feature_matrix(path: str | Path, expected_items: int, modality: str = "textual") -> FeatureMatrix:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SGFM_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {SGFM_MAGIC!r}")
        version, rows, cols = struct.unpack("<III", fh.read(12))
        if version != SGFM_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        raw = fh.read(4 * rows * cols)
    if len(raw) != 4 * rows * cols:
        raise DataError(f"{path}: truncated payload")
    if rows != expected_items:
        raise DataError(f"{path}: has {rows} rows but dataset has {expected_items} items")
    data = np.frombuffer(raw, dtype="<f4").reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite feature values")
    return FeatureMatrix(modality=modality, data=data)


# ---------------------------------------------------------------------------
# vocabulary files


def save_vocab(path: str | Path, vocab: dict[str, int]) -> None:
    pairs = sorted(vocab.items(), key=lambda kv: kv[1])
    with open(path, "w", encoding="utf-8") as fh:
        for raw, idx in pairs:
            fh.write(f"{raw}\t{idx}\n")


def load_vocab(path: str | Path) -> dict[str, int]:
    vocab: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected raw_id<TAB>dense_index")
            vocab[parts[0]] = int(parts[1])
    return vocab


# ---------------------------------------------------------------------------
# synthetic fixtures


def synth_dataset(
    n_users: int,
    n_items: int,
    edges_per_user: int,
    d_v: int,
    d_t: int,
    seed: int,
) -> tuple[InteractionDataset, FeatureMatrix, FeatureMatrix]:
    """Clustered synthetic dataset: users prefer items in their latent
    cluster (probability 0.9) and item features sit near per-cluster
    centroids, so modality similarity correlates with co-interaction.

    Features are strictly positive, which keeps all pairwise cosines
    nonnegative (the similarity-graph builders require that).
    """
    if edges_per_user < 3:
        raise DataError("edges_per_user must be >= 3")
    if n_items < edges_per_user:
        raise DataError("n_items must be >= edges_per_user")
    rng = np.random.default_rng(seed)
    n_clusters = max(2, min(8, n_items // 10)) if n_items >= 4 else 1
    item_cluster = np.arange(n_items) % n_clusters
    user_cluster = rng.integers(0, n_clusters, size=n_users)
    cluster_items = [np.flatnonzero(item_cluster == c) for c in range(n_clusters)]

    edges = np.empty((n_users * edges_per_user, 2), dtype=np.int64)
    k = 0
    for u in range(n_users):
        own = cluster_items[user_cluster[u]]
        chosen: set[int] = set()
        while len(chosen) < edges_per_user:
            in_cluster = rng.random() < 0.9
            pool = own if in_cluster else np.arange(n_items)
            remaining = [i for i in pool if i not in chosen]
            if not remaining:
                remaining = [i for i in range(n_items) if i not in chosen]
            chosen.add(int(remaining[rng.integers(0, len(remaining))]))
        for i in sorted(chosen):
            edges[k] = (u, i)
            k += 1

    def make_features(dim: int, modality: str) -> FeatureMatrix:
        centroids = rng.uniform(0.2, 1.0, size=(n_clusters, dim))
        noise = np.abs(rng.normal(0.0, 0.1, size=(n_items, dim)))
        return FeatureMatrix(modality=modality, data=centroids[item_cluster] + noise)

    visual = make_features(d_v, "visual")
    textual = make_features(d_t, "textual")
    dataset = InteractionDataset(
        n_users=n_users,
        n_items=n_items,
        edges=edges,
        user_vocab={f"u{k}": k for k in range(n_users)},
        item_vocab={f"i{k}": k for k in range(n_items)},
    )
    return dataset, visual, textual


def save_interactions(path: str | Path, dataset: InteractionDataset) -> None:
    """Write a dataset back out in the interactions TSV format."""
    users = dataset.user_raw_ids()
    items = dataset.item_raw_ids()
    with open(path, "w", encoding="utf-8") as fh:
        for u, i in dataset.edges:
            fh.write(f"{users[u]}\t{items[i]}\t0\n")
