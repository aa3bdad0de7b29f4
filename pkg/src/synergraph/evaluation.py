"""Top-K ranking, Recall@K / NDCG@K, and paired-bootstrap comparisons.

Evaluation ranks all items per user (no sampled negatives); already-seen
positives are excluded from the candidate set, ties break toward the
lower item index, and users without ground truth in a phase are left out
of that phase's means.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import TEST, TRAIN, VAL, SplitDataset

_USER_BLOCK = 2048


@dataclass
class MetricsReport:
    recall: float
    ndcg: float
    per_user_recall: np.ndarray  # aligned with user_indices
    per_user_ndcg: np.ndarray
    user_indices: np.ndarray     # users that had ground truth
    k: int
    split: str
    model: str = ""
    seed: int = 0
    dataset: str = ""

    @property
    def n_users(self) -> int:
        return len(self.user_indices)


class DotProductProvider:
    """Scores are inner products of final user/item embeddings."""

    def __init__(self, final_user: np.ndarray, final_item: np.ndarray):
        self.final_user = final_user
        self.final_item = final_item
        self.n_items = final_item.shape[0]

    def scores_for_users(self, user_idx: np.ndarray) -> np.ndarray:
        return self.final_user[user_idx] @ self.final_item.T


def topk_rank(
    scores: np.ndarray, exclusions: list[np.ndarray], k: int
) -> list[np.ndarray]:
    """Per-row top-k item indices after masking exclusions.

    Stable ordering: ties go to the lower item index. Rows with fewer
    than k remaining candidates yield shorter lists.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.array(scores, dtype=np.float64, copy=True)
    n_rows, n_items = scores.shape
    for r, excl in enumerate(exclusions):
        if len(excl):
            scores[r, excl] = -np.inf
    order = np.argsort(-scores, axis=1, kind="stable")
    out = []
    for r in range(n_rows):
        top = order[r, :k]
        finite = np.isfinite(scores[r, top])
        out.append(top[finite])
    return out


def _dcg(ranked: np.ndarray, gt: set) -> float:
    dcg = 0.0
    for pos, item in enumerate(ranked, start=1):
        if int(item) in gt:
            dcg += 1.0 / np.log2(1.0 + pos)
    return dcg


def _idcg(n_rel: int, k: int) -> float:
    return sum(1.0 / np.log2(1.0 + r) for r in range(1, min(k, n_rel) + 1))


def recall_at_k(result: list[np.ndarray], ground_truth: list[np.ndarray], k: int = 20) -> float:
    """Mean over users (with nonempty ground truth) of |hits| / |relevant|."""
    vals = []
    for ranked, gt in zip(result, ground_truth):
        if len(gt) == 0:
            continue
        hits = len(set(int(i) for i in ranked[:k]) & set(int(i) for i in gt))
        vals.append(hits / len(gt))
    return float(np.mean(vals)) if vals else 0.0


def ndcg_at_k(result: list[np.ndarray], ground_truth: list[np.ndarray], k: int = 20) -> float:
    vals = []
    for ranked, gt in zip(result, ground_truth):
        if len(gt) == 0:
            continue
        gts = set(int(i) for i in gt)
        vals.append(_dcg(ranked[:k], gts) / _idcg(len(gts), k))
    return float(np.mean(vals)) if vals else 0.0


def evaluate_model(
    provider,
    split: SplitDataset,
    phase: str = "test",
    k: int = 20,
    model: str = "",
    seed: int = 0,
    dataset: str = "",
) -> MetricsReport:
    """Rank every item for every user with ground truth in the phase.

    Validation excludes train positives; test excludes train and
    validation positives.
    """
    if phase == "val":
        gt_label, excl_labels = VAL, (TRAIN,)
    elif phase == "test":
        gt_label, excl_labels = TEST, (TRAIN, VAL)
    else:
        raise ValueError(f"unknown phase {phase!r}")
    gt_items = split.user_items(gt_label)
    excl_sets = [split.user_items(lbl) for lbl in excl_labels]
    eval_users = np.array(
        [u for u in range(split.base.n_users) if len(gt_items[u])], dtype=np.int64
    )
    rec = np.empty(len(eval_users))
    ndc = np.empty(len(eval_users))
    for start in range(0, len(eval_users), _USER_BLOCK):
        block = eval_users[start : start + _USER_BLOCK]
        scores = provider.scores_for_users(block)
        exclusions = [
            np.concatenate([s[u] for s in excl_sets]) if excl_sets else np.empty(0, dtype=np.int64)
            for u in block
        ]
        ranked = topk_rank(scores, exclusions, k)
        for j, u in enumerate(block):
            gts = set(int(i) for i in gt_items[u])
            hits = len(set(int(i) for i in ranked[j]) & gts)
            rec[start + j] = hits / len(gts)
            ndc[start + j] = _dcg(ranked[j], gts) / _idcg(len(gts), k)
    return MetricsReport(
        recall=float(rec.mean()) if len(rec) else 0.0,
        ndcg=float(ndc.mean()) if len(ndc) else 0.0,
        per_user_recall=rec,
        per_user_ndcg=ndc,
        user_indices=eval_users,
        k=k,
        split=phase,
        model=model,
        seed=seed,
        dataset=dataset,
    )


def compare_significance(
    per_user_a: np.ndarray,
    per_user_b: np.ndarray,
    n_boot: int = 10000,
    seed: int = 0,
) -> float:
    """Two-sided paired bootstrap p-value on the mean difference."""
    a = np.asarray(per_user_a, dtype=np.float64)
    b = np.asarray(per_user_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("per-user vectors must be paired (equal length)")
    diff = a - b
    n = len(diff)
    rng = np.random.default_rng(seed)
    means = np.empty(n_boot)
    for t in range(n_boot):
        means[t] = diff[rng.integers(0, n, size=n)].mean()
    le = int(np.sum(means <= 0.0))
    ge = int(np.sum(means >= 0.0))
    p = 2.0 * (min(le, ge) + 1) / (n_boot + 1)
    return float(min(1.0, p))


def pairwise_auc(scores_row: np.ndarray, pos_items: np.ndarray) -> float:
    """AUC of one user's positives against all other items."""
    pos = np.asarray(pos_items, dtype=np.int64)
    n_items = len(scores_row)
    mask = np.zeros(n_items, dtype=bool)
    mask[pos] = True
    pos_scores = scores_row[mask]
    neg_scores = scores_row[~mask]
    if len(pos_scores) == 0 or len(neg_scores) == 0:
        return float("nan")
    wins = 0.0
    for s in pos_scores:
        wins += np.sum(s > neg_scores) + 0.5 * np.sum(s == neg_scores)
    return float(wins / (len(pos_scores) * len(neg_scores)))


def train_auc(provider, split: SplitDataset) -> float:
    """Mean per-user AUC of train positives vs the rest of the items."""
    train_items = split.user_items(TRAIN)
    users = np.array(
        [u for u in range(split.base.n_users) if len(train_items[u])], dtype=np.int64
    )
    aucs = []
    for start in range(0, len(users), _USER_BLOCK):
        block = users[start : start + _USER_BLOCK]
        scores = provider.scores_for_users(block)
        for j, u in enumerate(block):
            aucs.append(pairwise_auc(scores[j], train_items[u]))
    return float(np.nanmean(aucs))


# ---------------------------------------------------------------------------
# report files


def save_report(path, report: MetricsReport) -> None:
    payload = {
        "model": report.model,
        "dataset": report.dataset,
        "seed": report.seed,
        "k": report.k,
        "split": report.split,
        "recall": report.recall,
        "ndcg": report.ndcg,
        "n_users": report.n_users,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def save_per_user(path, report: MetricsReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_index", "recall", "ndcg"])
        for u, r, n in zip(report.user_indices, report.per_user_recall, report.per_user_ndcg):
            w.writerow([int(u), repr(float(r)), repr(float(n))])


def load_per_user(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    users, rec, ndc = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["user_index", "recall", "ndcg"]:
            raise ValueError(f"{path}: unexpected per-user CSV header {header}")
        for row in reader:
            users.append(int(row[0]))
            rec.append(float(row[1]))
            ndc.append(float(row[2]))
    return np.array(users), np.array(rec), np.array(ndc)
