"""Evaluation metrics: exact-match accuracy and rank-based ROC AUC."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def accuracy(predicted, labels) -> float:
    """Fraction of exact matches."""
    predicted = np.asarray(predicted).ravel()
    labels = np.asarray(labels).ravel()
    if predicted.size != labels.size:
        raise ValueError(f"length mismatch: {predicted.size} predictions, {labels.size} labels")
    return float(np.mean(predicted == labels))


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank statistic; ties contribute 1/2.

    Equivalent to the probability that a random positive outscores a random
    negative, computed in O(N log N) from average ranks.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.size != labels.size:
        raise ValueError(f"length mismatch: {scores.size} scores, {labels.size} labels")
    positive = labels == np.max(labels)
    n_pos = int(positive.sum())
    n_neg = scores.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = rankdata(scores, method="average")
    pos_rank_sum = ranks[positive].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
