"""Session metrics: rank AUC of held-out predictions and knowledge coverage."""

from __future__ import annotations

from typing import Iterable

import numpy as np
from scipy.stats import rankdata

from ..ingest import QMatrix


def auc(scores, labels) -> float:
    """Rank AUC (Mann-Whitney), ties credited one half.

    Raises ``ValueError`` when the labels contain a single class.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same shape")
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def inf_metric(predictions, labels) -> float | None:
    """AUC on the not-yet-selected held-out questions; ``None`` when undefined."""
    labels = np.asarray(labels)
    if labels.size == 0 or labels.min() == labels.max():
        return None
    return auc(predictions, labels)


def cov_metric(q_t: Iterable[str], q: QMatrix) -> float:
    """Fraction of all skills assessed by the tested questions."""
    if q.n_skills < 1:
        raise ValueError("the Q-matrix has no skills")
    covered = np.zeros(q.n_skills, dtype=bool)
    for e in q_t:
        covered |= q.row(e).astype(bool)
    return float(covered.mean())
