"""Trainable parameters and the recommender forward pass.

Pipeline per step: project + gate raw modality features against item ID
embeddings (purifier), propagate item features over the frozen modality
graphs, lift them to users through the train interactions, propagate ID
embeddings over the normalized user-item graph (layer mean), then fuse
behavior and modality features with a preference-gated attention and add
the scaled fused block back onto the behavior features.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import FeatureMatrix, SplitDataset
from .graphs import ModalityGraph, build_or_load_graph
from .sparse import (
    SparseMatrix,
    build_interaction_matrix,
    build_norm_adjacency,
    row_normalize,
)

SGCK_MAGIC = b"SGCK"
SGCK_VERSION = 1


@dataclass
class ModelConfig:
    d: int = 64
    ui_layers: int = 2
    ii_layers: int = 1
    modalities: tuple[str, ...] = ("visual", "textual")
    use_purifier: bool = True
    use_item_item: bool = True
    use_circle: bool = True

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("embedding dimension must be >= 1")
        if not self.modalities:
            raise ValueError("at least one modality required")


@dataclass
class ModelParams:
    """All trainable tensors, keyed by canonical name.

    2-D: user_emb, item_emb, proj_W.<m>, gate_W.<m>, pref_W, attn_W.
    1-D: proj_b.<m>, gate_b.<m>, pref_b, attn_b, attn_q.
    """

    tensors: dict[str, np.ndarray]
    modalities: tuple[str, ...] = ()

    @property
    def user_emb(self) -> np.ndarray:
        return self.tensors["user_emb"]

    @property
    def item_emb(self) -> np.ndarray:
        return self.tensors["item_emb"]

    def copy(self) -> "ModelParams":
        return ModelParams(
            tensors={k: v.copy() for k, v in self.tensors.items()},
            modalities=self.modalities,
        )

    def as_tensors(self, requires_grad: bool = False) -> dict[str, Tensor]:
        return {k: Tensor(v, requires_grad=requires_grad) for k, v in self.tensors.items()}


def _xavier(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_params(
    cfg: ModelConfig,
    dims: dict[str, int],
    n_users: int,
    n_items: int,
    seed: int,
) -> ModelParams:
    """Xavier-uniform weights, zero biases, N(0, 0.01) ID embeddings."""
    rng = np.random.default_rng(seed)
    d = cfg.d
    t: dict[str, np.ndarray] = {}
    t["user_emb"] = rng.normal(0.0, 0.01, size=(n_users, d))
    t["item_emb"] = rng.normal(0.0, 0.01, size=(n_items, d))
    for m in cfg.modalities:
        t[f"proj_W.{m}"] = _xavier(rng, d, dims[m])
        t[f"proj_b.{m}"] = np.zeros(d)
        t[f"gate_W.{m}"] = _xavier(rng, d, d)
        t[f"gate_b.{m}"] = np.zeros(d)
    t["pref_W"] = _xavier(rng, d, d)
    t["pref_b"] = np.zeros(d)
    t["attn_W"] = _xavier(rng, d, d)
    t["attn_b"] = np.zeros(d)
    t["attn_q"] = _xavier(rng, 1, d).ravel()
    return ModelParams(tensors=t, modalities=cfg.modalities)


# ---------------------------------------------------------------------------
# forward pieces (tensor domain)


def _purify_t(pt: dict[str, Tensor], feats: np.ndarray, m: str, use_purifier: bool) -> Tensor:
    x = ad.linear(Tensor(feats), pt[f"proj_W.{m}"], pt[f"proj_b.{m}"])
    if not use_purifier:
        return x
    gate = ad.tanh(ad.linear(x, pt[f"gate_W.{m}"], pt[f"gate_b.{m}"]))
    return ad.mul(pt["item_emb"], gate)


def _propagate_mean_t(g0: Tensor, graph: SparseMatrix, n_layers: int) -> Tensor:
    if n_layers == 0:
        return g0
    acc = g0
    cur = g0
    for _ in range(n_layers):
        cur = ad.spmm(graph, cur)
        acc = ad.add(acc, cur)
    return ad.scale(acc, 1.0 / (n_layers + 1))


def _propagate_ii_t(x: Tensor, graph: ModalityGraph, n_layers: int, use_item_item: bool) -> Tensor:
    if use_item_item:
        for _ in range(n_layers):
            x = ad.spmm(graph.adjacency, x)
    return ad.frobenius_scale(x)


def _fuse_t(
    pt: dict[str, Tensor],
    behavior: Tensor,
    modal: dict[str, Tensor],
    modalities: tuple[str, ...],
) -> tuple[Tensor, Tensor]:
    pref = ad.tanh(ad.linear(behavior, pt["pref_W"], pt["pref_b"]))
    gated = [ad.mul(pref, modal[m]) for m in modalities]
    logits = [
        ad.matvec(ad.tanh(ad.linear(h, pt["attn_W"], pt["attn_b"])), pt["attn_q"])
        for h in gated
    ]
    attn = ad.row_softmax(ad.stack_cols(logits))
    fused: Tensor | None = None
    for j, h in enumerate(gated):
        term = ad.mul_rows(h, ad.get_col(attn, j))
        fused = term if fused is None else ad.add(fused, term)
    return fused, attn


def _eq16_t(behavior: Tensor, fused: Tensor) -> Tensor:
    sq = ad.total_sum(ad.mul(fused, fused))
    if float(sq.data) == 0.0:
        raise ValueError("fused features have zero norm")
    return ad.add(behavior, ad.mul_scalar(fused, ad.powf(sq, -0.25)))


@dataclass
class ForwardInputs:
    """Frozen per-run structures the forward pass propagates over."""

    n_users: int
    n_items: int
    norm_adj: SparseMatrix                 # (U+I) x (U+I) user-item propagation operator
    graphs: dict[str, ModalityGraph]       # item-item, per modality
    features: dict[str, FeatureMatrix]     # raw pre-extracted, per modality
    r_rownorm: SparseMatrix                # row-normalized train interactions


def prepare_inputs(
    split: SplitDataset,
    features: dict[str, FeatureMatrix],
    cfg: ModelConfig,
    top_k: int,
    cache_dir=None,
) -> ForwardInputs:
    r = build_interaction_matrix(split)
    graphs = {
        m: build_or_load_graph(features[m], top_k, cache_dir) for m in cfg.modalities
    }
    return ForwardInputs(
        n_users=split.base.n_users,
        n_items=split.base.n_items,
        norm_adj=build_norm_adjacency(r),
        graphs=graphs,
        features={m: features[m] for m in cfg.modalities},
        r_rownorm=row_normalize(r),
    )


def forward_graph(
    pt: dict[str, Tensor], inputs: ForwardInputs, cfg: ModelConfig
) -> dict[str, Tensor]:
    """Full forward pass in the tensor domain; returns all named outputs."""
    out: dict[str, Tensor] = {}
    for m in cfg.modalities:
        x = _purify_t(pt, inputs.features[m].data, m, cfg.use_purifier)
        y = _propagate_ii_t(x, inputs.graphs[m], cfg.ii_layers, cfg.use_item_item)
        out[f"item_modal.{m}"] = y
        out[f"user_modal.{m}"] = ad.spmm(inputs.r_rownorm, y)

    g0 = ad.concat_rows(pt["user_emb"], pt["item_emb"])
    beh = _propagate_mean_t(g0, inputs.norm_adj, cfg.ui_layers)
    b_u = ad.slice_rows(beh, 0, inputs.n_users)
    b_i = ad.slice_rows(beh, inputs.n_users, inputs.n_users + inputs.n_items)
    out["behavior_user"] = b_u
    out["behavior_item"] = b_i

    fused_u, attn_u = _fuse_t(
        pt, b_u, {m: out[f"user_modal.{m}"] for m in cfg.modalities}, cfg.modalities
    )
    fused_i, attn_i = _fuse_t(
        pt, b_i, {m: out[f"item_modal.{m}"] for m in cfg.modalities}, cfg.modalities
    )
    out["fused_user"], out["attn_user"] = fused_u, attn_u
    out["fused_item"], out["attn_item"] = fused_i, attn_i
    out["final_user"] = _eq16_t(b_u, fused_u)
    out["final_item"] = _eq16_t(b_i, fused_i)
    return out


# ---------------------------------------------------------------------------
# public numpy surface


@dataclass
class ForwardOutput:
    final_user: np.ndarray
    final_item: np.ndarray
    behavior_user: np.ndarray
    behavior_item: np.ndarray
    item_modal: dict[str, np.ndarray]
    user_modal: dict[str, np.ndarray]
    fused_user: np.ndarray
    fused_item: np.ndarray
    attn_user: np.ndarray
    attn_item: np.ndarray


def purify(
    features: FeatureMatrix,
    item_emb: np.ndarray,
    params: ModelParams,
    use_purifier: bool = True,
) -> np.ndarray:
    pt = params.as_tensors()
    pt = dict(pt, item_emb=Tensor(item_emb))
    return _purify_t(pt, features.data, features.modality, use_purifier).data


def propagate_ui(g0: np.ndarray, norm_adj: SparseMatrix, n_layers: int) -> np.ndarray:
    if norm_adj.n_rows != norm_adj.n_cols or norm_adj.n_rows != g0.shape[0]:
        raise ValueError("propagation operator must be square over the node set")
    return _propagate_mean_t(Tensor(np.asarray(g0, dtype=np.float64)), norm_adj, n_layers).data


def propagate_ii(
    g_m: np.ndarray, graph: ModalityGraph, n_layers: int, use_item_item: bool = True
) -> np.ndarray:
    return _propagate_ii_t(
        Tensor(np.asarray(g_m, dtype=np.float64)), graph, n_layers, use_item_item
    ).data


def lift_to_users(r: SparseMatrix, item_modal: np.ndarray) -> np.ndarray:
    return row_normalize(r).matmul_dense(np.asarray(item_modal, dtype=np.float64))


def fuse(
    behavior: np.ndarray,
    modal_feats: dict[str, np.ndarray],
    params: ModelParams,
    modalities: tuple[str, ...] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    modalities = modalities or tuple(modal_feats.keys())
    pt = params.as_tensors()
    fused, attn = _fuse_t(
        pt,
        Tensor(np.asarray(behavior, dtype=np.float64)),
        {m: Tensor(np.asarray(v, dtype=np.float64)) for m, v in modal_feats.items()},
        modalities,
    )
    return fused.data, attn.data


def forward(params: ModelParams, inputs: ForwardInputs, cfg: ModelConfig) -> ForwardOutput:
    out = forward_graph(params.as_tensors(), inputs, cfg)
    return ForwardOutput(
        final_user=out["final_user"].data,
        final_item=out["final_item"].data,
        behavior_user=out["behavior_user"].data,
        behavior_item=out["behavior_item"].data,
        item_modal={m: out[f"item_modal.{m}"].data for m in cfg.modalities},
        user_modal={m: out[f"user_modal.{m}"].data for m in cfg.modalities},
        fused_user=out["fused_user"].data,
        fused_item=out["fused_item"].data,
        attn_user=out["attn_user"].data,
        attn_item=out["attn_item"].data,
    )


def score(user_row: np.ndarray, item_row: np.ndarray) -> float:
    return float(np.dot(user_row, item_row))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: ModelParams) -> None:
    with open(path, "wb") as fh:
        fh.write(SGCK_MAGIC)
        fh.write(struct.pack("<II", SGCK_VERSION, len(params.tensors)))
        for name, arr in params.tensors.items():
            a2 = arr if arr.ndim == 2 else arr.reshape(1, -1)
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<II", a2.shape[0], a2.shape[1]))
            fh.write(a2.astype("<f4").tobytes(order="C"))


def load_checkpoint(path) -> ModelParams:
    tensors: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SGCK_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        version, count = struct.unpack("<II", fh.read(8))
        if version != SGCK_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            rows, cols = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(4 * rows * cols), dtype="<f4")
            arr = data.reshape(rows, cols).astype(np.float64)
            if _is_vector_param(name):
                arr = arr.ravel()
            tensors[name] = arr
    modalities = tuple(
        sorted({k.split(".", 1)[1] for k in tensors if k.startswith("proj_W.")})
    )
    return ModelParams(tensors=tensors, modalities=modalities)


def _is_vector_param(name: str) -> bool:
    base = name.split(".", 1)[0]
    return base.endswith("_b") or base == "attn_q"
