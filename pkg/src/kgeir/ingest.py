"""Interaction logs, Q-matrices and chronological hold-out splits."""

from __future__ import annotations

import csv
import hashlib
import math
from functools import cached_property
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LOG_COLUMNS = ("student_id", "exercise_id", "correct", "timestamp")
QMATRIX_COLUMNS = ("exercise_id", "skill_id")


class DataError(ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class InteractionRecord:
    student_id: str
    exercise_id: str
    correct: int
    timestamp: int


@dataclass(frozen=True)
class InteractionLog:
    """Ordered records plus per-student chronological views.

    Per-student views are ordered by timestamp, ties broken by record order.
    """

    records: tuple[InteractionRecord, ...]
    student_index: dict[str, tuple[InteractionRecord, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        grouped: dict[str, list[tuple[int, int, InteractionRecord]]] = defaultdict(list)
        seen: set[tuple[str, str, int]] = set()
        for pos, rec in enumerate(self.records):
            if rec.correct not in (0, 1):
                raise DataError(f"correct must be 0 or 1, got {rec.correct!r}")
            key = (rec.student_id, rec.exercise_id, rec.timestamp)
            if key in seen:
                raise DataError(f"duplicate (student, exercise, timestamp) triple {key}")
            seen.add(key)
            grouped[rec.student_id].append((rec.timestamp, pos, rec))
        index = {s: tuple(r for _, _, r in sorted(rows, key=lambda t: t[:2])) for s, rows in grouped.items()}
        object.__setattr__(self, "student_index", index)

    @property
    def n_records(self) -> int:
        return len(self.records)

    @property
    def n_students(self) -> int:
        return len(self.student_index)

    @property
    def students(self) -> list[str]:
        return sorted(self.student_index)

    @property
    def exercises(self) -> list[str]:
        return sorted({r.exercise_id for r in self.records})

    def for_student(self, student: str) -> tuple[InteractionRecord, ...]:
        try:
            return self.student_index[student]
        except KeyError:
            raise KeyError(f"unknown student {student!r}") from None

    def validate_against(self, q: "QMatrix") -> None:
        for i, rec in enumerate(self.records):
            if rec.exercise_id not in q.exercise_index:
                raise DataError(f"exercise {rec.exercise_id!r} (record {i}) is not in the Q-matrix")

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.records:
            h.update(f"{r.student_id},{r.exercise_id},{r.correct},{r.timestamp}\n".encode())
        return h.hexdigest()


def _read_csv(path: str | Path, required: Sequence[str]) -> Iterable[tuple[int, dict[str, str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"missing columns {missing} in header {header}", line=1)
        for row in reader:
            yield reader.line_num, row


def load_interaction_log(path: str | Path) -> InteractionLog:
    records = []
    seen: set[tuple[str, str, int]] = set()
    for line, row in _read_csv(path, LOG_COLUMNS):
        try:
            student = row["student_id"].strip()
            exercise = row["exercise_id"].strip()
            correct_raw = row["correct"].strip()
            timestamp = int(row["timestamp"].strip())
        except (AttributeError, ValueError) as exc:
            raise DataError(f"malformed row {row}: {exc}", line=line) from None
        if not student or not exercise:
            raise DataError("empty student_id or exercise_id", line=line)
        if correct_raw not in ("0", "1"):
            raise DataError(f"correct must be 0 or 1, got {correct_raw!r}", line=line)
        key = (student, exercise, timestamp)
        if key in seen:
            raise DataError(f"duplicate (student, exercise, timestamp) triple {key}", line=line)
        seen.add(key)
        records.append(InteractionRecord(student, exercise, int(correct_raw), timestamp))
    return InteractionLog(tuple(records))


def write_interaction_log(log: InteractionLog, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for r in log.records:
            writer.writerow([r.student_id, r.exercise_id, r.correct, r.timestamp])


@dataclass(frozen=True)
class QMatrix:
    """Binary exercise-by-skill incidence with sorted id orderings."""

    entries: np.ndarray
    exercise_ids: tuple[str, ...]
    skill_ids: tuple[str, ...]

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.int8)
        if entries.shape != (len(self.exercise_ids), len(self.skill_ids)):
            raise DataError(
                f"Q-matrix shape {entries.shape} does not match "
                f"{len(self.exercise_ids)} exercises x {len(self.skill_ids)} skills"
            )
        empty = np.flatnonzero(entries.sum(axis=1) == 0)
        if empty.size:
            raise DataError(f"exercise with no skill: {self.exercise_ids[empty[0]]!r}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n_exercises(self) -> int:
        return len(self.exercise_ids)

    @property
    def n_skills(self) -> int:
        return len(self.skill_ids)

    @cached_property
    def exercise_index(self) -> dict[str, int]:
        return {e: i for i, e in enumerate(self.exercise_ids)}

    @cached_property
    def skill_index(self) -> dict[str, int]:
        return {k: i for i, k in enumerate(self.skill_ids)}

    def row(self, exercise: str) -> np.ndarray:
        try:
            return self.entries[self.exercise_index[exercise]]
        except KeyError:
            raise KeyError(f"unknown exercise {exercise!r}") from None

    def skills_of(self, exercise: str) -> list[str]:
        return [self.skill_ids[k] for k in np.flatnonzero(self.row(exercise))]

    def weighted(self, weights: np.ndarray) -> np.ndarray:
        """Replace the ones of the matrix by per-skill weights."""
        return self.entries * np.asarray(weights, dtype=np.float64)[None, :]


def load_skill_vocabulary(path: str | Path) -> list[str]:
    return [row["skill_id"].strip() for _, row in _read_csv(path, ("skill_id",))]


def load_q_matrix(path: str | Path, skills_path: str | Path | None = None) -> QMatrix:
    """Read ``exercise_id,skill_id`` pairs; an empty skill marks a skill-free exercise."""
    vocab = set(load_skill_vocabulary(skills_path)) if skills_path else None
    pairs: dict[str, set[str]] = defaultdict(set)
    for line, row in _read_csv(path, QMATRIX_COLUMNS):
        exercise = (row["exercise_id"] or "").strip()
        skill = (row["skill_id"] or "").strip()
        if not exercise:
            raise DataError("empty exercise_id", line=line)
        pairs[exercise]
        if not skill:
            continue
        if vocab is not None and skill not in vocab:
            raise DataError(f"unknown skill {skill!r}", line=line)
        pairs[exercise].add(skill)
    for exercise, skills in pairs.items():
        if not skills:
            raise DataError(f"exercise with no skill: {exercise!r}")
    exercise_ids = tuple(sorted(pairs))
    skill_ids = tuple(sorted(vocab if vocab is not None else set().union(*pairs.values())))
    col = {k: j for j, k in enumerate(skill_ids)}
    entries = np.zeros((len(exercise_ids), len(skill_ids)), dtype=np.int8)
    for i, e in enumerate(exercise_ids):
        for k in pairs[e]:
            entries[i, col[k]] = 1
    return QMatrix(entries, exercise_ids, skill_ids)


def write_q_matrix(q: QMatrix, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(QMATRIX_COLUMNS)
        for i, e in enumerate(q.exercise_ids):
            for k in np.flatnonzero(q.entries[i]):
                writer.writerow([e, q.skill_ids[k]])


@dataclass(frozen=True)
class SessionSplit:
    student_id: str
    observed: tuple[InteractionRecord, ...]
    heldout: tuple[InteractionRecord, ...]
    seed: int


def split_holdout(log: InteractionLog, student: str, fraction: float, seed: int = 0) -> SessionSplit:
    """Chronological split: the earliest ``ceil((1 - fraction) * n)`` records are observed.

    ``seed`` is carried for provenance only; the split itself is deterministic.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must lie in [0, 1), got {fraction}")
    records = log.for_student(student)
    n = len(records)
    if n < 2:
        raise DataError(f"student {student!r} has {n} record(s); at least 2 are required")
    # the epsilon absorbs float error in products such as (1 - 0.3) * 10
    n_observed = math.ceil((1.0 - fraction) * n - 1e-9)
    if n_observed >= n:
        raise DataError(f"fraction {fraction} leaves the held-out part empty for {n} records")
    return SessionSplit(student, records[:n_observed], records[n_observed:], seed)


def summarize(log: InteractionLog, q: QMatrix | None = None) -> dict:
    summary = {
        "n_records": log.n_records,
        "n_students": log.n_students,
        "n_exercises_answered": len(log.exercises),
        "avg_records_per_student": round(log.n_records / max(log.n_students, 1), 1),
        "correct_rate": round(float(np.mean([r.correct for r in log.records])) if log.records else 0.0, 4),
    }
    if q is not None:
        summary["n_questions"] = q.n_exercises
        summary["n_skills"] = q.n_skills
        summary["mean_skills_per_question"] = round(float(q.entries.sum(axis=1).mean()), 3)
    return summary
