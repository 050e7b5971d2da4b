"""Representativeness of the tested question set.

The score of a candidate blends three terms: weighted knowledge coverage of
the tested set extended by the candidate, the student's predicted response
probability for it, and its mean embedding dissimilarity to the questions
already tested.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .cdm.base import CognitiveModel, build_dataset
from .ingest import InteractionLog, QMatrix

ALPHAS = (0.7, 0.15, 0.15)
ECOV_VARIANTS = ("saturating", "literal")


def skc(q_set: Iterable[str], q: QMatrix) -> float:
    """Fraction of skills assessed by at least one exercise of the set."""
    if q.n_skills < 1:
        raise ValueError("the Q-matrix has no skills")
    covered = np.zeros(q.n_skills, dtype=bool)
    for e in q_set:
        covered |= q.row(e).astype(bool)
    return float(covered.mean())


def ecov(cnt, variant: str = "saturating"):
    """Coverage value of a skill seen ``cnt`` times.

    ``saturating`` is ``2 sigmoid(cnt) - 1`` (bounded in [0, 1));
    ``literal`` is ``cnt * sigmoid(cnt)``, which is unbounded.
    """
    c = np.asarray(cnt, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("counts must be non-negative")
    if variant == "saturating":
        out = 2.0 * expit(c) - 1.0
    elif variant == "literal":
        out = c * expit(c)
    else:
        raise ValueError(f"unknown ECov variant {variant!r}; expected one of {ECOV_VARIANTS}")
    return float(out) if out.ndim == 0 else out


@dataclass
class CoverageState:
    """Per-skill occurrence counts over the tested set, with skill weights."""

    weights: np.ndarray
    counts: np.ndarray = None
    variant: str = "saturating"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.counts is None:
            self.counts = np.zeros(len(self.weights), dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != self.weights.shape:
            raise ValueError("counts and weights must have one entry per skill")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if np.any(self.weights < 0):
            raise ValueError("skill weights must be non-negative")

    @classmethod
    def from_tested(cls, tested: Iterable[str], q: QMatrix, weights, variant: str = "saturating") -> "CoverageState":
        state = cls(np.asarray(weights, dtype=np.float64), variant=variant)
        for e in tested:
            state.add(q.row(e))
        return state

    @property
    def ewkc(self) -> float:
        return ewkc(self)

    def with_row(self, row: np.ndarray) -> "CoverageState":
        return CoverageState(self.weights, self.counts + (np.asarray(row) > 0), self.variant)

    def add(self, row: np.ndarray) -> None:
        self.counts = self.counts + (np.asarray(row) > 0)


def ewkc(state: CoverageState) -> float:
    total = state.weights.sum()
    if total <= 0:
        raise ValueError("skill weights are all zero")
    return float(state.weights @ ecov(state.counts, state.variant) / total)


@dataclass(frozen=True)
class ResponseMatrix:
    student_ids: tuple[str, ...]
    exercise_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.student_ids), len(self.exercise_ids)):
            raise ValueError("response matrix shape does not match its ids")
        if np.any((self.values < 0) | (self.values > 1)):
            raise ValueError("response probabilities must lie in [0, 1]")

    def get(self, student: str, exercise: str) -> float:
        return float(self.values[self.student_ids.index(student), self.exercise_ids.index(exercise)])


def response_matrix(model: CognitiveModel, log: InteractionLog) -> ResponseMatrix:
    """Predicted correctness for every answered (student, exercise) cell, zero elsewhere.

    When an exercise was answered more than once the latest attempt's context wins.
    """
    data = build_dataset(model, log)
    values = np.zeros((len(model.student_ids), len(model.exercise_ids)))
    if len(data):
        values[data.students, data.exercises] = model.predict_batch(data)
    return ResponseMatrix(model.student_ids, model.exercise_ids, values)


@dataclass(frozen=True)
class DissimilarityMatrix:
    exercise_ids: tuple[str, ...]
    values: np.ndarray
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {e: i for i, e in enumerate(self.exercise_ids)})

    def mean_to(self, candidate: str, tested: Sequence[str]) -> float:
        """Mean dissimilarity to the tested questions; 1 when nothing is tested yet."""
        if not tested:
            return 1.0
        i = self.index[candidate]
        return float(np.mean([self.values[i, self.index[t]] for t in tested]))


def dissimilarity(e_star: np.ndarray, exercise_ids: Sequence[str]) -> DissimilarityMatrix:
    """``1 - cosine`` between exercise embeddings."""
    emb = np.asarray(e_star, dtype=np.float64)
    if emb.shape[0] != len(exercise_ids):
        raise ValueError("one embedding row per exercise is required")
    norms = np.linalg.norm(emb, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"zero-norm embedding for exercise {exercise_ids[zero[0]]!r}")
    unit = emb / norms[:, None]
    values = np.clip(1.0 - unit @ unit.T, 0.0, 2.0)
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 0.0)
    return DissimilarityMatrix(tuple(exercise_ids), values)


@dataclass(frozen=True)
class ScoreBreakdown:
    candidate_id: str
    coverage_term: float
    pn_term: float
    diss_term: float

    @property
    def total(self) -> float:
        return self.coverage_term + self.pn_term + self.diss_term


def representativeness_score(
    candidate: str,
    state: CoverageState,
    q: QMatrix,
    response: float,
    diss: DissimilarityMatrix,
    tested: Sequence[str],
    alphas: tuple[float, float, float] = ALPHAS,
) -> ScoreBreakdown:
    """Weighted terms of one candidate's score; ``response`` is the student's P_n entry."""
    a1, a2, a3 = alphas
    return ScoreBreakdown(
        candidate,
        a1 * state.with_row(q.row(candidate)).ewkc,
        a2 * float(response),
        a3 * diss.mean_to(candidate, tested),
    )


def select_representative(
    q_c: Sequence[str],
    state: CoverageState,
    q: QMatrix,
    responses: Mapping[str, float],
    diss: DissimilarityMatrix,
    tested: Sequence[str],
    alphas: tuple[float, float, float] = ALPHAS,
) -> tuple[str, list[ScoreBreakdown]]:
    """Highest-scoring candidate (ties to the smaller id) and every candidate's breakdown."""
    if not q_c:
        raise ValueError("the candidate set is empty")
    scored = [representativeness_score(c, state, q, responses[c], diss, tested, alphas) for c in q_c]
    best = min(scored, key=lambda s: (-s.total, s.candidate_id))
    return best.candidate_id, scored


AUDIT_COLUMNS = ("step", "candidate_id", "coverage_term", "pn_term", "diss_term", "total", "selected")


def write_audit(rows: Iterable[tuple[int, ScoreBreakdown, bool]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AUDIT_COLUMNS)
        for step, s, selected in rows:
            writer.writerow(
                [step, s.candidate_id, repr(s.coverage_term), repr(s.pn_term), repr(s.diss_term), repr(s.total), int(selected)]
            )
