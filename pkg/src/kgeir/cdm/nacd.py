"""Neural attentive cognitive diagnosis.

The prediction combines two factors:

* an exercise factor: relative-position self-attention over the knowledge
  vectors of the student's exercise sequence, read at the target position;
* a student factor: proficiency minus slipping, gated by guessing, masked by
  the target's weighted Q-row and passed through a two-layer sigmoid network.

``p = sigmoid(w_s . F_S + w_e . F_E + b_p)``.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .. import autodiff as ad
from ..embeddings import EmbeddingNetwork, RelationMatrices
from .base import CognitiveModel


def clip(x, k: int):
    if k < 0:
        raise ValueError("clip bound must be non-negative")
    return np.maximum(-k, np.minimum(k, x))


def relative_index(n: int, k: int) -> np.ndarray:
    """``idx[i, j] = clip(j - i, k) + k``: row into a ``(2k+1, d)`` table."""
    pos = np.arange(n)
    return clip(pos[None, :] - pos[:, None], k) + k


def exercise_factor(
    x: np.ndarray,
    w_q: np.ndarray,
    w_k: np.ndarray,
    w_v: np.ndarray,
    rel_k: np.ndarray,
    rel_v: np.ndarray,
    clip_k: int,
    edge_values: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Relative-position attention over a whole sequence of knowledge vectors.

    Returns ``(F_E, attention)`` with one row per position. With
    ``edge_values=False`` the value-side edge term is dropped.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != w_q.shape[0]:
        raise ValueError(f"input dimension {x.shape[1]} does not match projection rows {w_q.shape[0]}")
    n, d = x.shape[0], w_k.shape[1]
    idx = relative_index(n, clip_k)
    q, keys, values = x @ w_q, x @ w_k, x @ w_v
    scores = (q @ keys.T + np.einsum("id,ijd->ij", q, rel_k[idx])) / np.sqrt(d)
    scores -= scores.max(axis=1, keepdims=True)
    att = np.exp(scores)
    att /= att.sum(axis=1, keepdims=True)
    out = att @ values
    if edge_values:
        out = out + np.einsum("ij,ijd->id", att, rel_v[idx])
    return out, att


def _xavier(rng, fan_in, fan_out):
    return rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=(fan_in, fan_out))


class NacdModel(CognitiveModel):
    kind = "nacd"
    student_keys = ("A",)

    def __init__(
        self,
        student_ids: Sequence[str],
        exercise_ids: Sequence[str],
        params: dict[str, np.ndarray],
        q_weighted: np.ndarray,
        *,
        relations: RelationMatrices | None = None,
        clip_k: int = 4,
        history_window: int = 50,
        dropout: float = 0.2,
        gcn_layers: int = 2,
        delta_a: float = 0.5,
        edge_values: bool = True,
        disable_exercise_factor: bool = False,
        disable_student_factor: bool = False,
        seed: int = 0,
    ):
        super().__init__(student_ids, exercise_ids, params, seed)
        if disable_exercise_factor and disable_student_factor:
            raise ValueError("at least one of the exercise and student factors must stay enabled")
        self.q_weighted = np.asarray(q_weighted, dtype=np.float64)
        self.relations = relations
        self.clip_k = clip_k
        self.history_window = history_window
        self.dropout = dropout
        self.gcn_layers = gcn_layers
        self.delta_a = delta_a
        self.edge_values = edge_values
        self.disable_exercise_factor = disable_exercise_factor
        self.disable_student_factor = disable_student_factor
        self._tables = None

    @property
    def embedding(self) -> EmbeddingNetwork | None:
        if self.relations is None:
            return None
        return EmbeddingNetwork(self.relations, self.att_dim, self.gcn_layers, self.delta_a, self.seed)

    @property
    def att_dim(self) -> int:
        return self.params["att.w_k"].shape[1]

    @classmethod
    def create(
        cls,
        student_ids: Sequence[str],
        exercise_ids: Sequence[str],
        q_weighted: np.ndarray,
        *,
        relations: RelationMatrices | None = None,
        att_dim: int = 200,
        mlp_hidden: int = 64,
        factor_dim: int = 32,
        seed: int = 0,
        **options,
    ) -> "NacdModel":
        rng = np.random.default_rng(seed)
        n_s, n_e, k = len(student_ids), len(exercise_ids), q_weighted.shape[1]
        clip_k = options.get("clip_k", 4)
        x_dim = k + (att_dim if relations is not None else 0)
        params = {
            "A": rng.normal(0.0, 0.1, size=(n_s, k)),
            "B": rng.normal(0.0, 0.1, size=(n_e, k)),
            "C": rng.normal(0.0, 0.1, size=(n_e, k)),
            "mlp.w1": _xavier(rng, k, mlp_hidden),
            "mlp.b1": np.zeros(mlp_hidden),
            "mlp.w2": _xavier(rng, mlp_hidden, factor_dim),
            "mlp.b2": np.zeros(factor_dim),
            "out.w_s": rng.normal(0.0, 0.1, size=factor_dim),
            "out.w_e": rng.normal(0.0, 0.1, size=att_dim),
            "out.b": np.zeros(()),
            "att.w_q": _xavier(rng, x_dim, att_dim),
            "att.w_k": _xavier(rng, x_dim, att_dim),
            "att.w_v": _xavier(rng, x_dim, att_dim),
            "rel.k": rng.normal(0.0, 0.1, size=(2 * clip_k + 1, att_dim)),
            "rel.v": rng.normal(0.0, 0.1, size=(2 * clip_k + 1, att_dim)),
        }
        model = cls(student_ids, exercise_ids, params, q_weighted, relations=relations, seed=seed, **options)
        if relations is not None:
            params.update(model.embedding.init_params())
        return model

    def hyperparams(self) -> dict:
        return {
            "clip_k": self.clip_k,
            "history_window": self.history_window,
            "dropout": self.dropout,
            "gcn_layers": self.gcn_layers,
            "delta_a": self.delta_a,
            "edge_values": self.edge_values,
            "disable_exercise_factor": self.disable_exercise_factor,
            "disable_student_factor": self.disable_student_factor,
        }

    def constants(self) -> dict[str, np.ndarray]:
        out = {"q_weighted": self.q_weighted}
        if self.relations is not None:
            out["r_e"] = self.relations.r_e
            out["r_s"] = self.relations.r_s
        return out

    def invalidate(self) -> None:
        self._tables = None

    # -- forward -------------------------------------------------------------
    def exercise_inputs(self, P: Mapping):
        """Per-exercise attention inputs: the weighted Q-row, plus graph embeddings when enabled."""
        if self.relations is None:
            return self.q_weighted
        _, _, e_star, s_star = self.embedding.forward(P)
        return ad.concat([self.q_weighted, e_star + self.q_weighted @ s_star], axis=1)

    def _projected(self, P: Mapping):
        if P is self.params and self._tables is not None:
            return self._tables
        x = self.exercise_inputs(P)
        tables = (x @ P["att.w_q"], x @ P["att.w_k"], x @ P["att.w_v"])
        if P is self.params:
            self._tables = tables
        return tables

    def exercise_factor_at_target(self, exercises: np.ndarray, history: np.ndarray | None, P: Mapping):
        """Final-position row of the attention: the target attends to its history and itself."""
        qp, kp, vp = self._projected(P)
        b = len(exercises)
        hist = np.empty((b, 0), dtype=np.int64) if history is None else np.asarray(history, dtype=np.int64)
        seq = np.concatenate([hist, np.asarray(exercises)[:, None]], axis=1)
        length, d = seq.shape[1], self.att_dim
        valid = seq >= 0
        safe = np.where(valid, seq, 0).ravel()
        rel_idx = clip(np.arange(length) - (length - 1), self.clip_k) + self.clip_k
        query = ad.reshape(ad.take(qp, exercises), (b, 1, d))
        keys = ad.reshape(ad.take(kp, safe), (b, length, d)) + ad.take(P["rel.k"], rel_idx)
        scores = (keys * query).sum(axis=-1) * (1.0 / np.sqrt(d)) + np.where(valid, 0.0, -1e9)
        att = ad.softmax(scores, axis=-1)
        values = ad.reshape(ad.take(vp, safe), (b, length, d))
        if self.edge_values:
            values = values + ad.take(P["rel.v"], rel_idx)
        return (values * ad.reshape(att, (b, length, 1))).sum(axis=1)

    def student_factor_rows(self, rows: Mapping, exercises: np.ndarray, P: Mapping, training: bool = False, rng=None):
        q_rows = self.q_weighted[exercises]
        proficiency = ad.sigmoid(rows["A"])
        slipping = ad.sigmoid(ad.take(P["B"], exercises))
        guessing = ad.sigmoid(ad.take(P["C"], exercises))
        x = (proficiency - slipping) * guessing * q_rows
        hidden = ad.sigmoid(x @ P["mlp.w1"] + P["mlp.b1"])
        if training:
            hidden = ad.dropout(hidden, self.dropout, rng)
        return ad.sigmoid(hidden @ P["mlp.w2"] + P["mlp.b2"])

    def logits_rows(self, rows, exercises, history=None, P=None, training=False, rng=None):
        P = self.params if P is None else P
        exercises = np.asarray(exercises, dtype=np.int64)
        z = P["out.b"]
        if not self.disable_student_factor:
            z = z + self.student_factor_rows(rows, exercises, P, training, rng) @ P["out.w_s"]
        if not self.disable_exercise_factor:
            z = z + self.exercise_factor_at_target(exercises, history, P) @ P["out.w_e"]
        return z

    def student_logits(self, rows, exercises, P=None):
        P = self.params if P is None else P
        exercises = np.asarray(exercises, dtype=np.int64)
        z = P["out.b"]
        if not self.disable_student_factor:
            z = z + self.student_factor_rows(rows, exercises, P) @ P["out.w_s"]
        return z + np.zeros(len(exercises))

    def context_logits(self, exercises, history, P=None):
        P = self.params if P is None else P
        if self.disable_exercise_factor:
            return np.zeros(len(exercises))
        exercises = np.asarray(exercises, dtype=np.int64)
        return ad.value_of(self.exercise_factor_at_target(exercises, history, P) @ P["out.w_e"])

    def skill_embeddings(self) -> np.ndarray | None:
        if self.relations is None:
            return None
        return self.embedding.embed(self.params).s_star


def knowledge_vector(q_weighted: np.ndarray, exercise_ids: Sequence[str], exercise: str) -> np.ndarray:
    """One-hot selection of the exercise's row of the weighted Q-matrix."""
    try:
        i = list(exercise_ids).index(exercise)
    except ValueError:
        raise KeyError(f"unknown exercise {exercise!r}") from None
    onehot = np.zeros(len(exercise_ids))
    onehot[i] = 1.0
    return onehot @ q_weighted


def student_factor(model: NacdModel, student: str, exercise: str) -> np.ndarray:
    rows = {k: v[None] for k, v in model.student_rows(student).items()}
    ex = np.array([model.exercise_idx(exercise)])
    return np.asarray(ad.value_of(model.student_factor_rows(rows, ex, model.params)))[0]


def nacd_predict(model: NacdModel, student: str, exercise: str, history: Sequence[str] = ()) -> float:
    return float(model.predict(student, [exercise], history)[0])


def sigmoid(x):
    return expit(x)
