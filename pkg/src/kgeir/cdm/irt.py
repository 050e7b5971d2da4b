"""Two-parameter logistic IRT and its multidimensional analogue."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import autodiff as ad
from .base import CognitiveModel


class IrtModel(CognitiveModel):
    """``p = sigmoid(a_j * (theta_s - b_j))`` with ``a_j >= 0``."""

    kind = "irt"
    student_keys = ("theta",)

    @classmethod
    def create(cls, student_ids: Sequence[str], exercise_ids: Sequence[str], seed: int = 0) -> "IrtModel":
        rng = np.random.default_rng(seed)
        params = {
            "theta": rng.normal(0.0, 0.1, size=len(student_ids)),
            "a": np.ones(len(exercise_ids)) + rng.normal(0.0, 0.1, size=len(exercise_ids)).clip(-0.5, 0.5),
            "b": rng.normal(0.0, 0.1, size=len(exercise_ids)),
        }
        return cls(student_ids, exercise_ids, params, seed)

    def logits_rows(self, rows, exercises, history=None, P=None, training=False, rng=None):
        P = self.params if P is None else P
        return ad.take(P["a"], exercises) * (rows["theta"] - ad.take(P["b"], exercises))

    def project(self) -> None:
        np.maximum(self.params["a"], 0.0, out=self.params["a"])


class MirtModel(CognitiveModel):
    """``p = sigmoid(a_j . theta_s - b_j)`` with vector ability."""

    kind = "mirt"
    student_keys = ("theta",)

    @classmethod
    def create(cls, student_ids: Sequence[str], exercise_ids: Sequence[str], dim: int = 10, seed: int = 0) -> "MirtModel":
        rng = np.random.default_rng(seed)
        params = {
            "theta": rng.normal(0.0, 0.1, size=(len(student_ids), dim)),
            "a": rng.normal(0.0, 1.0 / np.sqrt(dim), size=(len(exercise_ids), dim)),
            "b": rng.normal(0.0, 0.1, size=len(exercise_ids)),
        }
        return cls(student_ids, exercise_ids, params, seed)

    @property
    def dim(self) -> int:
        return self.params["theta"].shape[1]

    def hyperparams(self) -> dict:
        return {"dim": self.dim}

    def logits_rows(self, rows, exercises, history=None, P=None, training=False, rng=None):
        P = self.params if P is None else P
        a = ad.take(P["a"], exercises)
        return (a * rows["theta"]).sum(axis=-1) - ad.take(P["b"], exercises)


def irt_predict(model: IrtModel | MirtModel, student: str, exercise: str) -> float:
    return float(model.predict(student, [exercise])[0])


mirt_predict = irt_predict
