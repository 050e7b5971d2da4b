"""Informativeness of untested questions as expected model change.

For a candidate question the model predicts ``p``; the score is
``p * |g(1)| + (1 - p) * |g(0)|`` where ``g(y)`` is the gradient of that
single record's cross-entropy with respect to the student's own parameters
had the answer been ``y``. Both outcomes for every candidate are scored in
one batched backward pass, without touching the model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .cdm.base import CognitiveModel


@dataclass(frozen=True)
class InformativenessScore:
    exercise_id: str
    emc: float

    def __post_init__(self):
        if not self.emc >= 0:
            raise ValueError(f"EMC must be non-negative, got {self.emc} for {self.exercise_id}")


@dataclass
class QuestionPartition:
    """Untested, candidate and tested questions of one session."""

    q_u: set[str]
    q_c: list[str]
    q_t: list[str]

    def check(self) -> None:
        c, t = set(self.q_c), set(self.q_t)
        if self.q_u & c or self.q_u & t or c & t:
            raise AssertionError("question sets overlap")


def _resolve_keys(model: CognitiveModel, param_keys: Sequence[str] | None) -> tuple[str, ...]:
    keys = model.student_keys if param_keys is None else tuple(param_keys)
    unknown = set(keys) - set(model.student_keys)
    if unknown:
        raise ValueError(f"EMC is defined over student-owned parameters only; got {sorted(unknown)}")
    return keys


def emc_scores(
    model: CognitiveModel,
    student: str,
    exercises: Sequence[str],
    history: Sequence[str] = (),
    param_keys: Sequence[str] | None = None,
) -> np.ndarray:
    """Expected model change for each exercise, in input order."""
    keys = _resolve_keys(model, param_keys)
    n = len(exercises)
    if n == 0:
        return np.zeros(0)
    if not keys:
        for e in exercises:
            model.exercise_idx(e)
        return np.zeros(n)
    idx = np.array([model.exercise_idx(e) for e in exercises], dtype=np.int64)
    base = model.student_rows(student)
    hist = np.repeat(model.history_for(history)[None], 2 * n, axis=0)
    leaves = {k: ad.Var(np.repeat(v[None], 2 * n, axis=0)) for k, v in base.items()}
    rows = {k: (leaves[k] if k in keys else leaves[k].value) for k in base}
    ex2 = np.concatenate([idx, idx])
    labels = np.concatenate([np.ones(n), np.zeros(n)])
    logits = model.logits_rows(rows, ex2, hist)
    p = expit(ad.value_of(logits)[:n])
    loss = ad.bce_with_logits(logits, labels, reduction="sum")
    sq = np.zeros(2 * n)
    if isinstance(loss, ad.Var):
        loss.backward()
        for k in keys:
            g = leaves[k].grad
            if g is not None:
                sq += (g.reshape(2 * n, -1) ** 2).sum(axis=1)
    norms = np.sqrt(sq)
    return p * norms[:n] + (1.0 - p) * norms[n:]


def expected_model_change(
    model: CognitiveModel,
    student: str,
    exercise: str,
    history: Sequence[str] = (),
    param_keys: Sequence[str] | None = None,
) -> InformativenessScore:
    return InformativenessScore(exercise, float(emc_scores(model, student, [exercise], history, param_keys)[0]))


def score_all(model, student, exercises, history=(), param_keys=None) -> list[InformativenessScore]:
    values = emc_scores(model, student, list(exercises), history, param_keys)
    return [InformativenessScore(e, float(v)) for e, v in zip(exercises, values)]


def select_candidates(scores: Sequence[InformativenessScore], k: int = 5) -> list[str]:
    """Top-``k`` exercises by EMC; ties go to the smaller exercise id."""
    if not scores:
        raise ValueError("no scores to select from")
    if k < 1:
        raise ValueError("K must be at least 1")
    ranked = sorted(scores, key=lambda s: (-s.emc, s.exercise_id))
    return [s.exercise_id for s in ranked[:k]]


def write_scores(scores: Sequence[InformativenessScore], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["exercise_id", "emc"])
        for s in scores:
            writer.writerow([s.exercise_id, repr(s.emc)])
