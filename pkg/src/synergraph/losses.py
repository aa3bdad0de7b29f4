"""Ranking and auxiliary losses: BPR, embedding regularization, and the
modified circle loss that pushes user behavior embeddings toward the
fused item features and away from single-modality ones.

Each loss has a tensor-domain builder (used inside the training graph)
and a numpy convenience wrapper with the same semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class CircleParams:
    margin: float = 0.75          # M; delta_p = 1 - M, delta_n = M
    gamma_scale: float = 1000.0   # logit amplifier
    conf: dict[str, float] = field(
        default_factory=lambda: {"textual": 0.7, "visual": 0.3}
    )
    coef: float = 0.1             # weight of the circle terms in the total loss

    def __post_init__(self):
        if not 0.0 <= self.margin <= 1.0:
            raise ValueError("margin must lie in [0, 1]")
        if self.gamma_scale <= 0.0:
            raise ValueError("gamma_scale must be positive")
        for m, c in self.conf.items():
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"confidence for {m} must lie in [0, 1]")


@dataclass
class BatchTriples:
    users: np.ndarray
    pos_items: np.ndarray
    neg_items: np.ndarray

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.pos_items = np.asarray(self.pos_items, dtype=np.int64)
        self.neg_items = np.asarray(self.neg_items, dtype=np.int64)
        if not (len(self.users) == len(self.pos_items) == len(self.neg_items)):
            raise ValueError("triple arrays must have equal length")

    def __len__(self) -> int:
        return len(self.users)


# ---------------------------------------------------------------------------
# tensor-domain builders


def bpr_loss_t(u_e: Tensor, pos_e: Tensor, neg_e: Tensor) -> Tensor:
    """Sum over the batch of -log sigmoid(s_pos - s_neg) via softplus."""
    diff = ad.sub(ad.dot_rows(u_e, pos_e), ad.dot_rows(u_e, neg_e))
    return ad.total_sum(ad.softplus(ad.neg(diff)))


def emb_reg_t(u: Tensor, i_pos: Tensor, i_neg: Tensor, lam: float) -> Tensor:
    sq = ad.add(
        ad.add(ad.total_sum(ad.mul(u, u)), ad.total_sum(ad.mul(i_pos, i_pos))),
        ad.total_sum(ad.mul(i_neg, i_neg)),
    )
    return ad.scale(sq, lam)


def circle_loss_t(
    u_e: Tensor, fused_pos: Tensor, modal_pos: Tensor, p: CircleParams, modality: str
) -> Tensor:
    """softplus(logsumexp(L_pos) + logsumexp(L_neg)) over the batch.

    S_pos is the user/fused cosine, S_neg the user/single-modality cosine;
    the negative weight is shrunk by that modality's confidence.
    """
    for name, t in (("user", u_e), ("fused", fused_pos), ("modal", modal_pos)):
        norms = np.linalg.norm(t.data, axis=1)
        if np.any(norms == 0.0):
            row = int(np.flatnonzero(norms == 0.0)[0])
            raise ValueError(f"zero-norm {name} row {row} in circle loss ({modality})")
    m, gamma = p.margin, p.gamma_scale
    c_neg = p.conf[modality]
    s_pos = ad.cosine_rows(u_e, fused_pos)
    s_neg = ad.cosine_rows(u_e, modal_pos)
    a_pos = ad.relu(ad.add_const(ad.neg(s_pos), 1.0 + m))
    a_neg = ad.scale(ad.relu(ad.add_const(s_neg, m)), 1.0 - c_neg)
    l_pos = ad.scale(ad.mul(a_pos, ad.add_const(s_pos, -(1.0 - m))), -gamma)
    l_neg = ad.scale(ad.mul(a_neg, ad.add_const(s_neg, -m)), gamma)
    return ad.softplus(ad.add(ad.logsumexp(l_pos), ad.logsumexp(l_neg)))


def total_loss_t(
    bpr: Tensor,
    reg: Tensor,
    circle_terms: dict[str, Tensor],
    coef: float,
    use_circle: bool = True,
) -> Tensor:
    total = ad.add(bpr, reg)
    if use_circle and circle_terms:
        acc = None
        for t in circle_terms.values():
            acc = t if acc is None else ad.add(acc, t)
        total = ad.add(total, ad.scale(acc, coef))
    return total


# ---------------------------------------------------------------------------
# numpy wrappers


def bpr_loss(u_e: np.ndarray, pos_e: np.ndarray, neg_e: np.ndarray) -> float:
    return float(bpr_loss_t(Tensor(_f64(u_e)), Tensor(_f64(pos_e)), Tensor(_f64(neg_e))).data)


def emb_reg(u: np.ndarray, i_pos: np.ndarray, i_neg: np.ndarray, lam: float) -> float:
    if lam < 0:
        raise ValueError("regularization coefficient must be nonnegative")
    return float(emb_reg_t(Tensor(_f64(u)), Tensor(_f64(i_pos)), Tensor(_f64(i_neg)), lam).data)


def circle_loss(
    u_e: np.ndarray,
    fused_pos: np.ndarray,
    modal_pos: np.ndarray,
    p: CircleParams,
    modality: str,
) -> float:
    return float(
        circle_loss_t(
            Tensor(_f64(u_e)), Tensor(_f64(fused_pos)), Tensor(_f64(modal_pos)), p, modality
        ).data
    )


def total_loss(
    bpr: float,
    reg: float,
    circle_text: float,
    circle_image: float,
    coef: float,
    use_circle: bool = True,
) -> float:
    parts = {"bpr": bpr, "reg": reg, "circle_text": circle_text, "circle_image": circle_image}
    for name, v in parts.items():
        if not np.isfinite(v):
            raise ValueError(f"non-finite loss component: {name}")
    out = bpr + reg
    if use_circle:
        out += coef * (circle_text + circle_image)
    return out


def _f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)
