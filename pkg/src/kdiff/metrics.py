"""Pairwise and BCubed precision / recall / F-score.

Predicted noise points (label ``-1``) are scored as singleton clusters, and
any 0/0 ratio is taken to be 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import ValidationError

__all__ = ["EvalReport", "pairwise_scores", "bcubed_scores", "evaluate", "f_score"]


def f_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ratio(num, den) -> float:
    return float(num / den) if den else 0.0


def _check(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.ndim != 1 or pred.shape != truth.shape:
        raise ValidationError(f"label length mismatch: {pred.shape} vs {truth.shape}")
    if truth.size and np.issubdtype(truth.dtype, np.number) and truth.min() < 0:
        raise ValidationError("ground truth must not contain noise labels")
    pred = pred.astype(np.int64)
    noise = pred < 0
    if noise.any():
        pred = pred.copy()
        pred[noise] = pred.max(initial=-1) + 1 + np.arange(noise.sum())
    return pred, truth


def _contingency(pred, truth):
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = sparse.coo_matrix(
        (np.ones(p.size, dtype=np.int64), (p, t)), shape=(p.max() + 1, t.max() + 1)
    ).tocsr()
    table.sum_duplicates()
    return table, np.bincount(p), np.bincount(t)


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def pairwise_scores(pred, truth) -> tuple[float, float, float]:
    pred, truth = _check(pred, truth)
    if pred.size == 0:
        return 0.0, 0.0, 0.0
    table, pred_sizes, true_sizes = _contingency(pred, truth)
    tp = _pairs(table.data)
    precision = _ratio(tp, _pairs(pred_sizes))
    recall = _ratio(tp, _pairs(true_sizes))
    return precision, recall, f_score(precision, recall)


def bcubed_scores(pred, truth) -> tuple[float, float, float]:
    pred, truth = _check(pred, truth)
    if pred.size == 0:
        return 0.0, 0.0, 0.0
    table, pred_sizes, true_sizes = _contingency(pred, truth)
    coo = table.tocoo()
    sq = coo.data.astype(np.int64) ** 2
    # each of the n_ij points in cell (i, j) scores n_ij/|C_i| and n_ij/|L_j|;
    # sum the integer squares per cluster first so each cluster costs one division
    per_pred = np.bincount(coo.row, weights=sq, minlength=pred_sizes.size) / pred_sizes
    per_true = np.bincount(coo.col, weights=sq, minlength=true_sizes.size) / true_sizes
    precision = math.fsum(per_pred) / pred.size
    recall = math.fsum(per_true) / pred.size
    return precision, recall, f_score(precision, recall)


@dataclass(frozen=True)
class EvalReport:
    pairwise: tuple[float, float, float]
    bcubed: tuple[float, float, float]
    n: int
    provenance: dict = field(default_factory=dict)

    @property
    def f_pairwise(self) -> float:
        return self.pairwise[2]

    @property
    def f_bcubed(self) -> float:
        return self.bcubed[2]

    def to_dict(self) -> dict:
        keys = ("precision", "recall", "f")
        return {
            "n": self.n,
            "pairwise": dict(zip(keys, self.pairwise)),
            "bcubed": dict(zip(keys, self.bcubed)),
            "provenance": self.provenance,
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def evaluate(result, truth) -> EvalReport:
    """Score a :class:`~kdiff.clustering.ClusterResult` against true labels."""
    return EvalReport(
        pairwise_scores(result.labels, truth),
        bcubed_scores(result.labels, truth),
        int(result.labels.size),
        dict(result.provenance),
    )
