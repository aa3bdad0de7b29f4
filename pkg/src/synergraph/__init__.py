"""Multimodal graph recommender: purified modality features, user-item and
item-item graph propagation, attention fusion, BPR + circle-loss training,
and a full ranking evaluation harness."""

from .data import (
    FeatureMatrix,
    InteractionDataset,
    InteractionTable,
    SplitDataset,
    encode_ids,
    load_feature_matrix,
    load_interactions,
    synth_dataset,
    user_split,
)
from .graphs import ModalityGraph, build_modality_graph, cosine_topk, sym_normalize
from .losses import BatchTriples, CircleParams, bpr_loss, circle_loss, emb_reg, total_loss
from .model import (
    ForwardInputs,
    ForwardOutput,
    ModelConfig,
    ModelParams,
    forward,
    fuse,
    init_params,
    lift_to_users,
    prepare_inputs,
    propagate_ii,
    propagate_ui,
    purify,
    score,
)
from .sparse import (
    SparseMatrix,
    build_interaction_matrix,
    build_norm_adjacency,
    csr_from_coo,
    spmm,
)
from .evaluation import (
    MetricsReport,
    compare_significance,
    evaluate_model,
    ndcg_at_k,
    recall_at_k,
    topk_rank,
)
from .trainer import (
    TrainConfig,
    adamw_step,
    build_model,
    fit,
    grad_check,
    sample_batches,
)
from .baselines import train_bprmf, train_itemknn, train_lightgcn

__version__ = "0.1.0"

__all__ = [
    "BatchTriples",
    "CircleParams",
    "FeatureMatrix",
    "ForwardInputs",
    "ForwardOutput",
    "InteractionDataset",
    "InteractionTable",
    "MetricsReport",
    "ModalityGraph",
    "ModelConfig",
    "ModelParams",
    "SparseMatrix",
    "SplitDataset",
    "TrainConfig",
    "adamw_step",
    "bpr_loss",
    "build_interaction_matrix",
    "build_modality_graph",
    "build_model",
    "build_norm_adjacency",
    "circle_loss",
    "compare_significance",
    "cosine_topk",
    "csr_from_coo",
    "emb_reg",
    "encode_ids",
    "evaluate_model",
    "fit",
    "forward",
    "fuse",
    "grad_check",
    "init_params",
    "lift_to_users",
    "load_feature_matrix",
    "load_interactions",
    "ndcg_at_k",
    "prepare_inputs",
    "propagate_ii",
    "propagate_ui",
    "purify",
    "recall_at_k",
    "sample_batches",
    "score",
    "spmm",
    "sym_normalize",
    "synth_dataset",
    "topk_rank",
    "total_loss",
    "train_bprmf",
    "train_itemknn",
    "train_lightgcn",
    "user_split",
]
