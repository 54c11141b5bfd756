"""Task evaluation metrics: accuracy, binary F1, Matthews correlation,
Spearman rank correlation.  All take plain numpy arrays; degenerate
denominators return 0 by convention."""

from __future__ import annotations

import numpy as np

from .errors import ContractError


def _check(preds, labels):
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ContractError(
            f"predictions and labels disagree: {preds.shape} vs {labels.shape}"
        )
    if preds.size == 0:
        raise ContractError("empty evaluation split")
    return preds, labels


def accuracy(preds, labels) -> float:
    preds, labels = _check(preds, labels)
    return float(np.mean(preds == labels))


def f1_binary(preds, labels) -> float:
    """F1 of the positive class (label 1); 0 when there are no positives
    anywhere."""
    preds, labels = _check(preds, labels)
    tp = float(np.sum((preds == 1) & (labels == 1)))
    fp = float(np.sum((preds == 1) & (labels == 0)))
    fn = float(np.sum((preds == 0) & (labels == 1)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def mcc(preds, labels) -> float:
    """Matthews correlation coefficient; 0 when any marginal is constant."""
    preds, labels = _check(preds, labels)
    tp = float(np.sum((preds == 1) & (labels == 1)))
    tn = float(np.sum((preds == 0) & (labels == 0)))
    fp = float(np.sum((preds == 1) & (labels == 0)))
    fn = float(np.sum((preds == 0) & (labels == 1)))
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / np.sqrt(denom)


def _ranks(x: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties share the mean of their positions."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(scores, targets) -> float:
    """Rank correlation: Pearson correlation of average ranks; 0 when
    either side is constant."""
    scores, targets = _check(np.asarray(scores, dtype=np.float64),
                             np.asarray(targets, dtype=np.float64))
    rs = _ranks(scores)
    rt = _ranks(targets)
    rs -= rs.mean()
    rt -= rt.mean()
    denom = np.sqrt(np.sum(rs * rs) * np.sum(rt * rt))
    if denom == 0.0:
        return 0.0
    return float(np.sum(rs * rt) / denom)


def evaluate_metric(name: str, preds, labels, scores=None) -> float:
    """Dispatch by metric name; `scores` (continuous) feed spearman,
    class predictions feed the rest."""
    if name == "accuracy":
        return accuracy(preds, labels)
    if name == "f1":
        return f1_binary(preds, labels)
    if name == "mcc":
        return mcc(preds, labels)
    if name == "spearman":
        return spearman(scores if scores is not None else preds, labels)
    raise ContractError(f"unknown metric {name!r}")
