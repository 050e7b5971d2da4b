"""Skill features and the skill importance weight.

Five per-skill features are derived from learning paths (level, frequency,
connection), skill embeddings (similarity) and response logs (difficulty).
After per-feature min-max normalization they are mixed under a novelty
and a popularity preset, and the importance weight is ``tanh`` of the sum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .ingest import InteractionLog, QMatrix
from .knowledge_graph import PathSet, level_in_path

FEATURES = ("f1", "f2", "f3", "f4", "f5")


@dataclass(frozen=True)
class PreferenceWeights:
    w1: float = 0.0
    w2: float = 0.0
    w3: float = 0.0
    w4: float = 0.0
    w5: float = 0.0

    def __post_init__(self):
        ws = self.as_array()
        if np.any(ws < 0):
            raise ValueError("preference weights must be non-negative")
        if not np.any(ws > 0):
            raise ValueError("at least one preference weight must be non-zero")

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4, self.w5], dtype=np.float64)


NOVELTY = PreferenceWeights(w1=0.5, w5=0.5)
POPULARITY = PreferenceWeights(w2=0.6, w3=0.1, w4=0.3)


def f1_level(paths: PathSet, kc: str) -> float:
    """Mean position of ``kc`` over the paths that contain it (0 if none)."""
    containing = paths.containing(kc)
    if not containing:
        return 0.0
    return float(np.mean([level_in_path(p, kc) for p in containing]))


def f2_frequency(paths: PathSet, kc: str) -> float:
    if len(paths) == 0:
        raise ValueError("frequency is undefined on an empty path set")
    return len(paths.containing(kc)) / len(paths)


def connect_set(paths: PathSet, kc: str, skills: Sequence[str] | None = None) -> set[str]:
    linked = {n for p in paths.containing(kc) for n in p if n != kc}
    return linked if skills is None else linked & set(skills)


def f3_connection(paths: PathSet, kc: str, n_skills: int, skills: Sequence[str] | None = None) -> float:
    if n_skills < 1:
        raise ValueError("the number of skills must be at least 1")
    return len(connect_set(paths, kc, skills)) / n_skills


def f4_similarity(skill_embeddings: np.ndarray, index: int) -> float:
    """Mean cosine similarity of one skill embedding to every other skill."""
    emb = np.asarray(skill_embeddings, dtype=np.float64)
    if emb.shape[0] < 2:
        raise ValueError("similarity needs at least two skills")
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"zero-norm skill embedding at row {int(np.flatnonzero(norms == 0)[0])}")
    cos = emb @ emb[index] / (norms * norms[index])
    return float((cos.sum() - cos[index]) / (emb.shape[0] - 1))


def _kc_attempts(log: InteractionLog, q: QMatrix, student: str, kc: str) -> tuple[np.ndarray, np.ndarray]:
    col = q.skill_index[kc]
    idx = q.exercise_index
    rows = [r for r in log.for_student(student) if q.entries[idx[r.exercise_id], col]]
    return (
        np.array([r.timestamp for r in rows], dtype=np.int64),
        np.array([r.correct for r in rows], dtype=np.int64),
    )


def _pi(timestamps: np.ndarray, correct: np.ndarray, t: int) -> int:
    window = timestamps < t
    attempts = int(window.sum())
    if attempts < 5:
        return 5
    wrong = int(attempts - correct[window].sum())
    return math.floor(wrong / attempts * 4)


def pi_difficulty(log: InteractionLog, q: QMatrix, student: str, kc: str, t: int) -> int:
    """Cognitive difficulty of ``kc`` for one student over timestamps ``[0, t)``.

    Fewer than five attempts gives the top level 5; otherwise the wrong-answer
    ratio is bucketed into 0..4.
    """
    ts, correct = _kc_attempts(log, q, student, kc)
    return _pi(ts, correct, t)


def f5_difficulty(
    log: InteractionLog, q: QMatrix, kc: str, checkpoints: Sequence[int] | None = None
) -> float:
    """Mean difficulty over the student x checkpoint grid.

    ``checkpoints=None`` evaluates every student once, after their last record.
    """
    if checkpoints is not None and len(checkpoints) == 0:
        raise ValueError("at least one checkpoint is required")
    students = log.students
    if not students:
        raise ValueError("difficulty needs at least one student")
    values = []
    for s in students:
        ts, correct = _kc_attempts(log, q, s, kc)
        if checkpoints is None:
            last = log.for_student(s)[-1].timestamp
            values.append(_pi(ts, correct, last + 1))
        else:
            values.extend(_pi(ts, correct, t) for t in checkpoints)
    return float(np.mean(values))


def minmax_normalize(column: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant column maps to 0.5."""
    column = np.asarray(column, dtype=np.float64)
    lo, hi = column.min(), column.max()
    if hi - lo <= 1e-12:
        return np.full_like(column, 0.5)
    return (column - lo) / (hi - lo)


def combine(features: np.ndarray, w: PreferenceWeights) -> np.ndarray | float:
    """Weighted sum of (normalized) features; the last axis holds f1..f5."""
    out = np.asarray(features, dtype=np.float64) @ w.as_array()
    return float(out) if np.ndim(out) == 0 else out


def skill_importance(w_nov, w_pop):
    return np.tanh(np.asarray(w_nov, dtype=np.float64) + w_pop)


@dataclass(frozen=True)
class SkillImportanceTable:
    skill_ids: tuple[str, ...]
    raw: np.ndarray  # (K, 5) unnormalized f1..f5
    w_nov: np.ndarray
    w_pop: np.ndarray

    @property
    def w_skill(self) -> np.ndarray:
        return self.w_nov + self.w_pop

    @property
    def w_k(self) -> np.ndarray:
        return skill_importance(self.w_nov, self.w_pop)

    @property
    def normalized(self) -> np.ndarray:
        return np.column_stack([minmax_normalize(self.raw[:, j]) for j in range(5)])

    def weights_for(self, skill_ids: Sequence[str]) -> np.ndarray:
        index = {k: i for i, k in enumerate(self.skill_ids)}
        return np.array([self.w_k[index[k]] for k in skill_ids])

    @classmethod
    def from_features(
        cls,
        skill_ids: Sequence[str],
        raw: np.ndarray,
        novelty: PreferenceWeights = NOVELTY,
        popularity: PreferenceWeights = POPULARITY,
    ) -> "SkillImportanceTable":
        raw = np.asarray(raw, dtype=np.float64)
        norm = np.column_stack([minmax_normalize(raw[:, j]) for j in range(5)])
        return cls(tuple(skill_ids), raw, combine(norm, novelty), combine(norm, popularity))


def compute_features(
    paths: PathSet,
    skill_embeddings: np.ndarray,
    log: InteractionLog,
    q: QMatrix,
    checkpoints: Sequence[int] | None = None,
) -> np.ndarray:
    """Raw (K, 5) feature matrix for the Q-matrix skills, in Q-matrix order."""
    skills = list(q.skill_ids)
    k = len(skills)
    raw = np.zeros((k, 5))
    for i, kc in enumerate(skills):
        raw[i, 0] = f1_level(paths, kc)
        raw[i, 1] = f2_frequency(paths, kc) if len(paths) else 0.0
        raw[i, 2] = f3_connection(paths, kc, k, skills)
        raw[i, 3] = f4_similarity(skill_embeddings, i)
        raw[i, 4] = f5_difficulty(log, q, kc, checkpoints)
    return raw


def importance_table(
    paths: PathSet,
    skill_embeddings: np.ndarray,
    log: InteractionLog,
    q: QMatrix,
    checkpoints: Sequence[int] | None = None,
) -> SkillImportanceTable:
    raw = compute_features(paths, skill_embeddings, log, q, checkpoints)
    return SkillImportanceTable.from_features(q.skill_ids, raw)


TABLE_COLUMNS = ("skill_id", "f1", "f2", "f3", "f4", "f5", "w_nov", "w_pop", "w_k")


def write_table(table: SkillImportanceTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for i, kc in enumerate(table.skill_ids):
            row = [*table.raw[i], table.w_nov[i], table.w_pop[i], table.w_k[i]]
            writer.writerow([kc, *(repr(float(v)) for v in row)])


def read_table(path: str | Path) -> SkillImportanceTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    skills = tuple(r["skill_id"] for r in rows)
    raw = np.array([[float(r[f]) for f in FEATURES] for r in rows]).reshape(len(rows), 5)
    return SkillImportanceTable(
        skills, raw, np.array([float(r["w_nov"]) for r in rows]), np.array([float(r["w_pop"]) for r in rows])
    )


def weights_mapping(table: SkillImportanceTable) -> Mapping[str, float]:
    return dict(zip(table.skill_ids, table.w_k.tolist()))
