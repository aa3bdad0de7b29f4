"""Reference models sharing the data, trainer, and evaluation stack:
ItemKNN (training-free), BPR-MF, and LightGCN (which reduces to BPR-MF
at zero propagation layers).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .data import SplitDataset
from .losses import BatchTriples, bpr_loss_t, emb_reg_t
from .model import ModelParams
from .sparse import SparseMatrix, build_interaction_matrix, build_norm_adjacency
from .trainer import TrainConfig, fit


class EmbeddingModel:
    """ID-embedding ranker trained with BPR; optional LightGCN-style
    propagation over the normalized user-item adjacency."""

    def __init__(
        self,
        n_users: int,
        n_items: int,
        d: int,
        lam: float,
        norm_adj: SparseMatrix | None = None,
        n_layers: int = 0,
        label: str = "bprmf",
    ):
        if n_layers > 0 and norm_adj is None:
            raise ValueError("propagation layers require the normalized adjacency")
        self.n_users = n_users
        self.n_items = n_items
        self.d = d
        self.lam = lam
        self.norm_adj = norm_adj
        self.n_layers = n_layers
        self.label = label

    def init_params(self, seed: int) -> ModelParams:
        rng = np.random.default_rng(seed)
        return ModelParams(
            tensors={
                "user_emb": rng.normal(0.0, 0.01, size=(self.n_users, self.d)),
                "item_emb": rng.normal(0.0, 0.01, size=(self.n_items, self.d)),
            }
        )

    def _final_t(self, pt: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
        if self.n_layers == 0:
            return pt["user_emb"], pt["item_emb"]
        g0 = ad.concat_rows(pt["user_emb"], pt["item_emb"])
        acc = g0
        cur = g0
        for _ in range(self.n_layers):
            cur = ad.spmm(self.norm_adj, cur)
            acc = ad.add(acc, cur)
        beh = ad.scale(acc, 1.0 / (self.n_layers + 1))
        return (
            ad.slice_rows(beh, 0, self.n_users),
            ad.slice_rows(beh, self.n_users, self.n_users + self.n_items),
        )

    def loss_graph(self, pt: dict[str, Tensor], batch: BatchTriples):
        fu, fi = self._final_t(pt)
        bpr = bpr_loss_t(
            ad.gather_rows(fu, batch.users),
            ad.gather_rows(fi, batch.pos_items),
            ad.gather_rows(fi, batch.neg_items),
        )
        reg = emb_reg_t(
            ad.gather_rows(pt["user_emb"], batch.users),
            ad.gather_rows(pt["item_emb"], batch.pos_items),
            ad.gather_rows(pt["item_emb"], batch.neg_items),
            self.lam,
        )
        loss = ad.add(bpr, reg)
        return loss, {
            "bpr": float(bpr.data),
            "reg": float(reg.data),
            "circle.textual": 0.0,
            "circle.visual": 0.0,
        }

    def final_embeddings(self, params: ModelParams):
        fu, fi = self._final_t(params.as_tensors())
        return fu.data, fi.data


def train_bprmf(split: SplitDataset, cfg: TrainConfig, d: int = 64, history_path=None):
    """BPR matrix factorization via the shared trainer (Adam, no decay)."""
    model = EmbeddingModel(
        split.base.n_users, split.base.n_items, d, lam=cfg.lam, label="bprmf"
    )
    return fit(model, split, cfg, history_path=history_path)


def train_lightgcn(
    split: SplitDataset, cfg: TrainConfig, n_layers: int = 2, d: int = 64, history_path=None
):
    """ID embeddings propagated over the normalized bipartite adjacency."""
    norm_adj = None
    if n_layers > 0:
        norm_adj = build_norm_adjacency(build_interaction_matrix(split))
    model = EmbeddingModel(
        split.base.n_users,
        split.base.n_items,
        d,
        lam=cfg.lam,
        norm_adj=norm_adj,
        n_layers=n_layers,
        label="lightgcn",
    )
    return fit(model, split, cfg, history_path=history_path)


class ItemKNNProvider:
    """score(u, i) = sum over u's train items j of sim(i, j), with each
    item's similarity row restricted to its k most similar items."""

    label = "itemknn"

    def __init__(self, r_train: SparseMatrix, sim_topk: sp.csr_matrix):
        self._r = r_train.to_scipy()
        self._sim = sim_topk
        self.n_items = r_train.n_cols

    def scores_for_users(self, user_idx: np.ndarray) -> np.ndarray:
        return (self._r[user_idx] @ self._sim.T).toarray()


def train_itemknn(split: SplitDataset, k_neighbors: int = 20) -> ItemKNNProvider:
    """Cosine similarity over binary train interaction columns."""
    r = build_interaction_matrix(split)
    rs = r.to_scipy()
    deg = np.asarray(rs.sum(axis=0)).ravel()
    with np.errstate(divide="ignore"):
        inv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    rn = rs @ sp.diags(inv)
    sim = (rn.T @ rn).tocsr()
    sim.setdiag(0.0)
    sim.eliminate_zeros()
    n = sim.shape[0]
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for i in range(n):
        lo, hi = sim.indptr[i], sim.indptr[i + 1]
        idx = sim.indices[lo:hi]
        val = sim.data[lo:hi]
        if len(val) > k_neighbors:
            # stable selection: ties toward the smaller column index
            order = np.argsort(-val, kind="stable")[:k_neighbors]
            idx, val = idx[order], val[order]
        rows.append(np.full(len(idx), i, dtype=np.int64))
        cols.append(idx.astype(np.int64))
        vals.append(val)
    sim_topk = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return ItemKNNProvider(r, sim_topk)
