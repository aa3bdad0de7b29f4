"""Loss values against unvectorized references and hand-computed cases."""

import math

import numpy as np
import pytest

from synergraph.losses import (
    BatchTriples,
    CircleParams,
    bpr_loss,
    circle_loss,
    emb_reg,
    total_loss,
)
from references import ref_bpr, ref_circle, ref_emb_reg


def unit_pair(cosine: float) -> np.ndarray:
    """A 2-d unit vector whose cosine against [1, 0] equals `cosine`."""
    return np.array([cosine, math.sqrt(max(0.0, 1.0 - cosine * cosine))])


def circle_at(s_pos: float, s_neg: float, p: CircleParams, modality="textual") -> float:
    u = np.array([[1.0, 0.0]])
    return circle_loss(u, unit_pair(s_pos)[None, :], unit_pair(s_neg)[None, :], p, modality)


# ---------------------------------------------------------------------------
# BPR


def test_bpr_equal_scores_ln2():
    u = np.array([[1.0, 0.0]])
    assert bpr_loss(u, u, u) == pytest.approx(math.log(2.0), rel=1e-12)


def test_bpr_unit_gap():
    u = np.array([[1.0]])
    pos = np.array([[2.0]])
    neg = np.array([[1.0]])
    assert bpr_loss(u, pos, neg) == pytest.approx(math.log1p(math.exp(-1.0)), rel=1e-12)


def test_bpr_monotone_to_zero():
    u = np.array([[1.0]])
    neg = np.array([[0.0]])
    last = np.inf
    for gap in (1.0, 5.0, 20.0, 100.0):
        val = bpr_loss(u, np.array([[gap]]), neg)
        assert val < last
        last = val
    assert last < 1e-8


def test_bpr_gradient_signs():
    # d loss / d s_pos < 0 and d loss / d s_neg > 0, via central differences
    u = np.array([[1.0]])
    eps = 1e-6
    for sp, sn in [(0.3, -0.2), (2.0, 1.0), (-1.0, 0.5)]:
        dp = (bpr_loss(u, [[sp + eps]], [[sn]]) - bpr_loss(u, [[sp - eps]], [[sn]])) / (2 * eps)
        dn = (bpr_loss(u, [[sp]], [[sn + eps]]) - bpr_loss(u, [[sp]], [[sn - eps]])) / (2 * eps)
        assert dp < 0.0
        assert dn > 0.0


def test_bpr_matches_reference(rng):
    for _ in range(20):
        b = int(rng.integers(1, 32))
        u, p, n = (rng.normal(size=(b, 5)) for _ in range(3))
        assert bpr_loss(u, p, n) == pytest.approx(ref_bpr(u, p, n), rel=1e-10)


# ---------------------------------------------------------------------------
# embedding regularization


def test_emb_reg_values():
    assert emb_reg(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), 0.5) == 0.0
    val = emb_reg(np.array([[1.0, 1.0]]), np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]]), 0.5)
    assert val == pytest.approx(1.5, rel=1e-12)


def test_emb_reg_linear_in_lambda(rng):
    u, p, n = (rng.normal(size=(4, 3)) for _ in range(3))
    assert emb_reg(u, p, n, 0.2) == pytest.approx(2 * emb_reg(u, p, n, 0.1), rel=1e-12)


def test_emb_reg_rejects_negative_lambda(rng):
    u = rng.normal(size=(2, 2))
    with pytest.raises(ValueError):
        emb_reg(u, u, u, -1.0)


def test_emb_reg_matches_reference(rng):
    u, p, n = (rng.normal(size=(6, 4)) for _ in range(3))
    assert emb_reg(u, p, n, 1e-3) == pytest.approx(ref_emb_reg(u, p, n, 1e-3), rel=1e-10)


# ---------------------------------------------------------------------------
# circle loss


def paper_params(c_neg_text=0.7) -> CircleParams:
    return CircleParams(margin=0.75, gamma_scale=1000.0,
                        conf={"textual": c_neg_text, "visual": 0.3})


def test_circle_hand_case_near_zero():
    # S_pos=1, S_neg=0, C_neg=0.7: softplus(-562.5 - 168.75) ~ 0
    p = paper_params()
    loss = circle_at(1.0, 0.0, p)
    assert 0.0 <= loss < 1e-100


def test_circle_hand_case_875():
    # S_pos=0, S_neg=1, C_neg=0: softplus(437.5 + 437.5) = 875
    p = paper_params(c_neg_text=0.0)
    assert circle_at(0.0, 1.0, p) == pytest.approx(875.0, rel=1e-6)


def test_circle_full_confidence_kills_negative_term():
    p = paper_params(c_neg_text=1.0)
    base = circle_at(0.3, -0.9, p)
    for s_neg in (-0.5, 0.0, 0.5, 1.0):
        assert circle_at(0.3, s_neg, p) == pytest.approx(base, rel=1e-12)


def test_circle_nonnegative_and_monotone_in_s_pos():
    p = CircleParams(margin=0.75, gamma_scale=10.0, conf={"textual": 0.5, "visual": 0.3})
    grid = [-1.0, -0.5, 0.0, 0.5, 1.0]
    for s_neg in grid:
        losses = [circle_at(s_pos, s_neg, p) for s_pos in grid]
        assert all(v >= 0.0 for v in losses)
        assert all(a >= b - 1e-12 for a, b in zip(losses, losses[1:]))


def test_circle_monotone_in_s_neg_above_zero():
    # The value is non-decreasing in S_neg where the (S_neg+M)(S_neg-M)
    # parabola rises, i.e. S_neg >= 0 (see decisions ledger).
    p = CircleParams(margin=0.75, gamma_scale=10.0, conf={"textual": 0.5, "visual": 0.3})
    for s_pos in [-1.0, -0.5, 0.0, 0.5, 1.0]:
        losses = [circle_at(s_pos, s_neg, p) for s_neg in (0.0, 0.5, 1.0)]
        assert all(a <= b + 1e-12 for a, b in zip(losses, losses[1:]))


def test_circle_confidence_ordering_above_margin():
    # A more trusted modality (larger C_neg) is penalized less once the
    # negative similarity exceeds the margin.
    lo = CircleParams(margin=0.75, gamma_scale=1000.0, conf={"textual": 0.2, "visual": 0.3})
    hi = CircleParams(margin=0.75, gamma_scale=1000.0, conf={"textual": 0.8, "visual": 0.3})
    for s_pos in (-0.5, 0.0, 0.5):
        for s_neg in (0.8, 0.9, 1.0):
            assert circle_at(s_pos, s_neg, lo) >= circle_at(s_pos, s_neg, hi) - 1e-9


def test_circle_zero_norm_rejected():
    p = paper_params()
    u = np.array([[0.0, 0.0]])
    v = np.array([[1.0, 0.0]])
    with pytest.raises(ValueError, match="zero-norm"):
        circle_loss(u, v, v, p, "textual")


def test_circle_matches_reference(rng):
    p = CircleParams(margin=0.75, gamma_scale=1000.0, conf={"textual": 0.7, "visual": 0.3})
    for _ in range(20):
        b = int(rng.integers(1, 32))
        u = rng.normal(size=(b, 6)) + 0.1
        fused = rng.normal(size=(b, 6)) + 0.1
        modal = rng.normal(size=(b, 6)) + 0.1
        got = circle_loss(u, fused, modal, p, "visual")
        want = ref_circle(u, fused, modal, 0.75, 1000.0, 0.3)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# total


def test_total_loss_arithmetic():
    assert total_loss(1.0, 0.5, 2.0, 3.0, 0.1) == pytest.approx(2.0, rel=1e-12)
    assert total_loss(1.0, 0.5, 2.0, 3.0, 0.0) == pytest.approx(1.5, rel=1e-12)
    assert total_loss(1.0, 0.5, 2.0, 3.0, 0.1, use_circle=False) == pytest.approx(1.5)


def test_total_loss_rejects_nonfinite():
    with pytest.raises(ValueError, match="circle_text"):
        total_loss(1.0, 0.5, float("nan"), 3.0, 0.1)
    with pytest.raises(ValueError, match="bpr"):
        total_loss(float("inf"), 0.5, 0.0, 0.0, 0.1)


def test_batch_triples_validation():
    with pytest.raises(ValueError):
        BatchTriples([0, 1], [0], [1])


def test_circle_params_reference_defaults():
    p = CircleParams()
    assert p.margin == 0.75
    assert p.gamma_scale == 1000.0
    assert p.conf == {"textual": 0.7, "visual": 0.3}
    assert p.coef == 0.1


def test_circle_params_validation():
    with pytest.raises(ValueError):
        CircleParams(margin=1.5)
    with pytest.raises(ValueError):
        CircleParams(gamma_scale=0.0)
    with pytest.raises(ValueError):
        CircleParams(conf={"textual": 1.2, "visual": 0.3})
