"""Shared machinery for the cognitive-diagnosis models.

Every model keeps its parameters in a flat ``dict[str, ndarray]``. Some
arrays are indexed by student (``student_keys``); the rest belong to
exercises or to the network. Forward passes take the student rows
explicitly, one row per record, which lets the same code train the
population model, replay one student's session, and evaluate many
hypothetical per-record updates in a single batch.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .. import autodiff as ad
from ..ingest import InteractionLog, InteractionRecord


@dataclass(frozen=True)
class Batch:
    students: np.ndarray
    exercises: np.ndarray
    labels: np.ndarray
    history: np.ndarray  # (B, W) exercise indices, left-padded with -1

    def __len__(self) -> int:
        return len(self.exercises)

    def subset(self, idx: np.ndarray) -> "Batch":
        return Batch(self.students[idx], self.exercises[idx], self.labels[idx], self.history[idx])


def history_row(previous: Sequence[int], window: int) -> np.ndarray:
    row = np.full(window, -1, dtype=np.int64)
    if window and len(previous):
        tail = np.asarray(previous[-window:], dtype=np.int64)
        row[window - len(tail):] = tail
    return row


class CognitiveModel:
    """Base class: subclasses define ``kind``, ``student_keys`` and ``logits_rows``."""

    kind = "base"
    student_keys: tuple[str, ...] = ()
    history_window = 0

    def __init__(self, student_ids: Sequence[str], exercise_ids: Sequence[str], params: dict[str, np.ndarray], seed: int = 0):
        self.student_ids = tuple(student_ids)
        self.exercise_ids = tuple(exercise_ids)
        self.student_index = {s: i for i, s in enumerate(self.student_ids)}
        self.exercise_index = {e: i for i, e in enumerate(self.exercise_ids)}
        self.params = params
        self.seed = seed

    # -- to override --------------------------------------------------------
    def logits_rows(self, rows: Mapping, exercises: np.ndarray, history: np.ndarray | None, P: Mapping | None = None, training: bool = False, rng=None):
        raise NotImplementedError

    def student_logits(self, rows: Mapping, exercises: np.ndarray, P: Mapping | None = None):
        """Logit terms that depend on student rows; the default assumes no history term."""
        return self.logits_rows(rows, exercises, None, P)

    def context_logits(self, exercises: np.ndarray, history: np.ndarray | None, P: Mapping | None = None) -> np.ndarray:
        """Logit terms that depend only on the exercise and its history."""
        return np.zeros(len(exercises))

    def hyperparams(self) -> dict:
        return {}

    def constants(self) -> dict[str, np.ndarray]:
        return {}

    def project(self) -> None:
        """Restore parameter constraints after an optimizer step."""

    def invalidate(self) -> None:
        """Drop caches derived from non-student parameters."""

    # -- shared -------------------------------------------------------------
    def gather_rows(self, P: Mapping, students: np.ndarray) -> dict:
        return {k: ad.take(P[k], students) for k in self.student_keys}

    def logits(self, P: Mapping, batch: Batch, training: bool = False, rng=None):
        rows = self.gather_rows(P, batch.students)
        return self.logits_rows(rows, batch.exercises, batch.history, P, training, rng)

    def loss(self, P: Mapping, batch: Batch, training: bool = False, rng=None):
        return ad.bce_with_logits(self.logits(P, batch, training, rng), batch.labels)

    def predict_batch(self, batch: Batch) -> np.ndarray:
        return expit(ad.value_of(self.logits(self.params, batch)))

    def student_idx(self, student: str) -> int:
        try:
            return self.student_index[student]
        except KeyError:
            raise KeyError(f"unknown student {student!r}") from None

    def exercise_idx(self, exercise: str) -> int:
        try:
            return self.exercise_index[exercise]
        except KeyError:
            raise KeyError(f"unknown exercise {exercise!r}") from None

    def student_rows(self, student: str) -> dict[str, np.ndarray]:
        s = self.student_idx(student)
        return {k: self.params[k][s].copy() for k in self.student_keys}

    def set_student_rows(self, student: str, rows: Mapping[str, np.ndarray]) -> None:
        s = self.student_idx(student)
        for k in self.student_keys:
            self.params[k][s] = rows[k]

    def history_for(self, exercises: Iterable[str]) -> np.ndarray:
        return history_row([self.exercise_idx(e) for e in exercises], self.history_window)

    def predict_rows(self, rows: Mapping[str, np.ndarray], exercises: np.ndarray, history: np.ndarray | None = None) -> np.ndarray:
        """Probabilities for explicit student rows (leading axis = records)."""
        return expit(ad.value_of(self.logits_rows(rows, exercises, history)))

    def predict(self, student: str, exercises: Sequence[str], history: Sequence[str] = ()) -> np.ndarray:
        idx = np.array([self.exercise_idx(e) for e in exercises], dtype=np.int64)
        rows = {k: np.repeat(v[None], len(idx), axis=0) for k, v in self.student_rows(student).items()}
        hist = np.repeat(self.history_for(history)[None], len(idx), axis=0)
        return self.predict_rows(rows, idx, hist)

    def copy(self) -> "CognitiveModel":
        clone = copy.copy(self)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        clone.invalidate()
        return clone


def build_dataset(model: CognitiveModel, log: InteractionLog, include: set[InteractionRecord] | None = None) -> Batch:
    """Records of ``log`` (optionally a subset) as index arrays.

    The history of a record is the chronologically preceding exercises of
    the same student in the full log, capped at the model's window.
    """
    students, exercises, labels, hist = [], [], [], []
    window = model.history_window
    for s in sorted(log.student_index):
        if s not in model.student_index:
            continue
        s_idx = model.student_index[s]
        previous: list[int] = []
        for rec in log.for_student(s):
            e_idx = model.exercise_idx(rec.exercise_id)
            if include is None or rec in include:
                students.append(s_idx)
                exercises.append(e_idx)
                labels.append(rec.correct)
                hist.append(history_row(previous, window))
            previous.append(e_idx)
    return Batch(
        np.array(students, dtype=np.int64),
        np.array(exercises, dtype=np.int64),
        np.array(labels, dtype=np.float64),
        np.array(hist, dtype=np.int64).reshape(len(students), window),
    )


def row_updates(
    model: CognitiveModel,
    rows: Mapping[str, np.ndarray],
    exercises: np.ndarray,
    labels: np.ndarray,
    history: np.ndarray | None,
    steps: int,
    lr: float,
) -> dict[str, np.ndarray]:
    """Gradient steps on per-record losses, each record owning its row copy.

    Summing the losses keeps the records independent: row ``i`` only
    receives the gradient of record ``i``.
    """
    current = {k: np.array(v, dtype=np.float64) for k, v in rows.items()}
    for _ in range(steps):
        leaves = {k: ad.Var(v) for k, v in current.items()}
        loss = ad.bce_with_logits(model.logits_rows(leaves, exercises, history), labels, reduction="sum")
        if not isinstance(loss, ad.Var):
            break
        loss.backward()
        current = {
            k: v - lr * (leaves[k].grad if leaves[k].grad is not None else 0.0) for k, v in current.items()
        }
    return current


def update_incremental(
    model: CognitiveModel,
    record: InteractionRecord,
    steps: int = 1,
    lr: float = 0.1,
    history: Sequence[str] = (),
) -> CognitiveModel:
    """Fit the student's own parameters to one new record; exercise parameters stay frozen."""
    if steps <= 0:
        return model
    rows = {k: v[None] for k, v in model.student_rows(record.student_id).items()}
    ex = np.array([model.exercise_idx(record.exercise_id)])
    hist = model.history_for(history)[None]
    new = row_updates(model, rows, ex, np.array([float(record.correct)]), hist, steps, lr)
    model.set_student_rows(record.student_id, {k: v[0] for k, v in new.items()})
    return model
