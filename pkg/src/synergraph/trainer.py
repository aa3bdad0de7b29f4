"""Training loop: negative sampling, exact reverse-mode gradients through
the forward graph, AdamW updates, early stopping on validation recall,
and a finite-difference gradient checker.

Everything is deterministic given (seed, config, data): one RNG drives
sampling, parameter init uses its own seeded RNG, and every reduction
order is fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import data as D
from .autodiff import Tensor
from .data import SplitDataset, synth_dataset, user_split
from .losses import (
    BatchTriples,
    CircleParams,
    bpr_loss_t,
    circle_loss_t,
    emb_reg_t,
    total_loss_t,
)
from .model import (
    ForwardInputs,
    ModelConfig,
    ModelParams,
    forward_graph,
    init_params,
    prepare_inputs,
)
from . import autodiff as ad


class TrainError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 1024
    epochs: int = 200
    weight_decay: float = 1e-5
    seed: int = 123
    lam: float = 1e-4  # embedding regularization coefficient
    circle: CircleParams = field(default_factory=CircleParams)
    early_stop_patience: int = 20  # evaluations without improvement
    eval_every: int = 5

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("lr, batch_size and epochs must be positive")


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_optimizer(params: ModelParams) -> OptimizerState:
    return OptimizerState(
        m={k: np.zeros_like(v) for k, v in params.tensors.items()},
        v={k: np.zeros_like(v) for k, v in params.tensors.items()},
    )


def adamw_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    weight_decay: float = 0.0,
) -> None:
    """Decoupled weight decay, then the bias-corrected Adam update."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.tensors.items():
        g = grads[name]
        if weight_decay:
            p *= 1.0 - lr * weight_decay
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# ---------------------------------------------------------------------------
# batches


def sample_batches(
    split: SplitDataset,
    batch_size: int,
    rng: np.random.Generator,
    max_attempts: int = 100,
):
    """Shuffled train edges with rejection-sampled uniform negatives.

    Negatives only avoid train positives; the final partial batch is kept.
    """
    train = split.train_edges()
    if len(train) == 0:
        raise TrainError("no train edges to sample from")
    n_items = split.base.n_items
    train_keys = set((train[:, 0] * n_items + train[:, 1]).tolist())
    perm = rng.permutation(len(train))
    for start in range(0, len(train), batch_size):
        chunk = train[perm[start : start + batch_size]]
        negs = np.empty(len(chunk), dtype=np.int64)
        for r, (u, _i) in enumerate(chunk):
            for _ in range(max_attempts):
                j = int(rng.integers(0, n_items))
                if int(u) * n_items + j not in train_keys:
                    negs[r] = j
                    break
            else:
                raise TrainError(
                    f"could not sample a negative for user {int(u)} "
                    f"after {max_attempts} attempts"
                )
        yield BatchTriples(chunk[:, 0], chunk[:, 1], negs)


# ---------------------------------------------------------------------------
# the proposed model as a trainable unit


class SynerGraphModel:
    """Couples the forward graph with the batch loss (Eq.-27-style sum)."""

    label = "synergraph"

    def __init__(
        self,
        mcfg: ModelConfig,
        inputs: ForwardInputs,
        circle: CircleParams,
        lam: float,
    ):
        self.mcfg = mcfg
        self.inputs = inputs
        self.circle = circle
        self.lam = lam

    def init_params(self, seed: int) -> ModelParams:
        dims = {m: f.dim for m, f in self.inputs.features.items()}
        return init_params(self.mcfg, dims, self.inputs.n_users, self.inputs.n_items, seed)

    def loss_graph(self, pt: dict[str, Tensor], batch: BatchTriples):
        out = forward_graph(pt, self.inputs, self.mcfg)
        u_f = ad.gather_rows(out["final_user"], batch.users)
        p_f = ad.gather_rows(out["final_item"], batch.pos_items)
        n_f = ad.gather_rows(out["final_item"], batch.neg_items)
        bpr = bpr_loss_t(u_f, p_f, n_f)
        reg = emb_reg_t(
            ad.gather_rows(pt["user_emb"], batch.users),
            ad.gather_rows(pt["item_emb"], batch.pos_items),
            ad.gather_rows(pt["item_emb"], batch.neg_items),
            self.lam,
        )
        circle_terms: dict[str, Tensor] = {}
        if self.mcfg.use_circle:
            u_b = ad.gather_rows(out["behavior_user"], batch.users)
            fused_p = ad.gather_rows(out["fused_item"], batch.pos_items)
            for m in self.mcfg.modalities:
                modal_p = ad.gather_rows(out[f"item_modal.{m}"], batch.pos_items)
                circle_terms[m] = circle_loss_t(u_b, fused_p, modal_p, self.circle, m)
        loss = total_loss_t(bpr, reg, circle_terms, self.circle.coef, self.mcfg.use_circle)
        comps = {
            "bpr": float(bpr.data),
            "reg": float(reg.data),
            "circle.textual": float(circle_terms["textual"].data) if "textual" in circle_terms else 0.0,
            "circle.visual": float(circle_terms["visual"].data) if "visual" in circle_terms else 0.0,
        }
        return loss, comps

    def final_embeddings(self, params: ModelParams):
        out = forward_graph(params.as_tensors(), self.inputs, self.mcfg)
        return out["final_user"].data, out["final_item"].data


def build_model(
    mcfg: ModelConfig,
    split: SplitDataset,
    features: dict[str, D.FeatureMatrix],
    top_k: int,
    circle: CircleParams,
    lam: float,
    cache_dir=None,
) -> SynerGraphModel:
    inputs = prepare_inputs(split, features, mcfg, top_k, cache_dir)
    return SynerGraphModel(mcfg, inputs, circle, lam)


# ---------------------------------------------------------------------------
# backward + fit


def backward(model, params: ModelParams, batch: BatchTriples):
    """Loss components and exact gradients for one batch."""
    pt = params.as_tensors(requires_grad=True)
    loss, comps = model.loss_graph(pt, batch)
    if not np.isfinite(loss.data):
        raise TrainError("non-finite total loss")
    loss.backward()
    grads: dict[str, np.ndarray] = {}
    for name, arr in params.tensors.items():
        g = pt[name].grad
        if g is None:
            g = np.zeros_like(arr)
        elif not np.all(np.isfinite(g)):
            raise TrainError(f"non-finite gradient for tensor {name}")
        grads[name] = g
    comps["total"] = float(loss.data)
    return comps, grads


def fit(
    model,
    split: SplitDataset,
    cfg: TrainConfig,
    history_path=None,
    eval_k: int = 20,
    verbose: bool = False,
):
    """Run the epoch loop; returns (best-validation params, history).

    History entries carry per-sample mean BPR/regularization, per-batch
    mean circle terms, and validation metrics on evaluation epochs.

    Best-checkpoint selection needs a nonempty validation split: under
    the floor split rule users contribute validation edges only from
    degree 10 up, and if none do, every evaluation scores 0.0 and the
    first evaluated epoch's parameters are kept.
    """
    from .evaluation import DotProductProvider, evaluate_model

    rng = np.random.default_rng(cfg.seed)
    params = model.init_params(cfg.seed)
    state = init_optimizer(params)
    history: list[dict] = []
    best_params: ModelParams | None = None
    best_recall = -np.inf
    stale_evals = 0
    last_good = params.copy()
    circle_coef = model.circle.coef if hasattr(model, "circle") else 0.0
    log_fh = open(history_path, "w", encoding="utf-8") if history_path else None

    try:
        for epoch in range(1, cfg.epochs + 1):
            sums = {"bpr": 0.0, "reg": 0.0, "circle.textual": 0.0, "circle.visual": 0.0}
            n_samples = 0
            n_batches = 0
            diverged = False
            for batch in sample_batches(split, cfg.batch_size, rng):
                try:
                    comps, grads = backward(model, params, batch)
                except TrainError:
                    diverged = True
                    break
                adamw_step(params, grads, state, cfg.lr, cfg.weight_decay)
                for k in sums:
                    sums[k] += comps[k]
                n_samples += len(batch)
                n_batches += 1

            entry: dict = {"epoch": epoch}
            if n_samples:
                entry["loss_bpr"] = sums["bpr"] / n_samples
                entry["loss_reg"] = sums["reg"] / n_samples
                entry["loss_circle_text"] = sums["circle.textual"] / n_batches
                entry["loss_circle_image"] = sums["circle.visual"] / n_batches
                entry["loss_total"] = (
                    entry["loss_bpr"]
                    + entry["loss_reg"]
                    + circle_coef * (entry["loss_circle_text"] + entry["loss_circle_image"])
                )
            if diverged:
                entry["diverged"] = True
                history.append(entry)
                if log_fh:
                    log_fh.write(json.dumps(entry) + "\n")
                break

            if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
                fu, fi = model.final_embeddings(params)
                rep = evaluate_model(DotProductProvider(fu, fi), split, "val", k=eval_k)
                entry["val_recall20"] = rep.recall
                entry["val_ndcg20"] = rep.ndcg
                if rep.recall > best_recall:
                    best_recall = rep.recall
                    best_params = params.copy()
                    stale_evals = 0
                else:
                    stale_evals += 1
            history.append(entry)
            if log_fh:
                log_fh.write(json.dumps(entry) + "\n")
                log_fh.flush()
            if verbose:
                print(f"epoch {epoch}: " + json.dumps({k: v for k, v in entry.items() if k != 'epoch'}))
            last_good = params.copy()
            if stale_evals >= cfg.early_stop_patience:
                break
    finally:
        if log_fh:
            log_fh.close()

    if best_params is not None:
        return best_params, history
    if history and history[-1].get("diverged"):
        return last_good, history
    return params, history


# ---------------------------------------------------------------------------
# gradient verification


def make_gradcheck_fixture(
    seed: int = 7,
    n_users: int = 6,
    n_items: int = 8,
    d: int = 4,
    gamma_scale: float = 1000.0,
):
    """Small fixture exercising every parameter tensor and loss path."""
    ds, fv, ft = synth_dataset(n_users, n_items, edges_per_user=4, d_v=5, d_t=5, seed=seed)
    split = user_split(ds, seed=seed)
    mcfg = ModelConfig(d=d, ui_layers=2, ii_layers=1)
    circle = CircleParams(gamma_scale=gamma_scale)
    model = build_model(
        mcfg, split, {"visual": fv, "textual": ft}, top_k=3, circle=circle, lam=1e-3
    )
    rng = np.random.default_rng(seed)
    batch = next(sample_batches(split, batch_size=n_users, rng=rng))
    return model, batch


def grad_check(
    model,
    batch: BatchTriples,
    seed: int = 0,
    eps: float = 1e-4,
    corrupt_tensor: str | None = None,
    emb_scale: float = 100.0,
) -> float:
    """Worst relative disagreement between backward() and central
    finite differences, across every parameter element.

    The check runs at a generic parameter point: ID embeddings are
    rescaled away from the N(0, 0.01) init, whose row norms are close
    to the finite-difference step and poison the cosine curvature.
    """
    if eps <= 0:
        raise ValueError("finite-difference step must be positive")
    params = model.init_params(seed)
    for key in ("user_emb", "item_emb"):
        if key in params.tensors:
            params.tensors[key] *= emb_scale
    comps, grads = backward(model, params, batch)
    if corrupt_tensor is not None:
        grads[corrupt_tensor] = -grads[corrupt_tensor]

    def loss_value() -> float:
        loss, _ = model.loss_graph(params.as_tensors(), batch)
        return float(loss.data)

    worst = 0.0
    for name, arr in params.tensors.items():
        flat = arr.reshape(-1)
        g = grads[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lp = loss_value()
            flat[idx] = orig - eps
            lm = loss_value()
            flat[idx] = orig
            fd = (lp - lm) / (2.0 * eps)
            rel = abs(g[idx] - fd) / max(abs(g[idx]), abs(fd), 1e-6)
            worst = max(worst, rel)
    return worst
