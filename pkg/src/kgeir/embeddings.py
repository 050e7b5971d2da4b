"""Exercise and skill embeddings from the student-exercise-skill graph.

Neighbourhoods come from three meta-relations: exercises answered by the
same student, exercises sharing a skill, and skills sharing an exercise.
A stack of graph convolutions over the row-normalized relation matrices
produces hidden states, which a scaled dot-product attention blended with
the relation matrix refines into the final embeddings.

Every forward function accepts plain arrays or :class:`~kgeir.autodiff.Var`
parameters, so the same code serves inference and end-to-end training.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .ingest import InteractionLog, QMatrix


@dataclass(frozen=True)
class RelationMatrices:
    r_e: np.ndarray
    r_s: np.ndarray

    @staticmethod
    def support_to_stochastic(support: np.ndarray) -> np.ndarray:
        support = support.astype(np.float64)
        np.fill_diagonal(support, 1.0)
        return support / support.sum(axis=1, keepdims=True)


def build_relation_matrices(log: InteractionLog, q: QMatrix) -> RelationMatrices:
    idx = q.exercise_index
    students = log.students
    answered = np.zeros((len(students), q.n_exercises))
    for si, s in enumerate(students):
        for rec in log.for_student(s):
            answered[si, idx[rec.exercise_id]] = 1.0
    qm = q.entries.astype(np.float64)
    ese = (answered.T @ answered) > 0
    eke = (qm @ qm.T) > 0
    kek = (qm.T @ qm) > 0
    return RelationMatrices(
        RelationMatrices.support_to_stochastic(ese | eke),
        RelationMatrices.support_to_stochastic(kek),
    )


@dataclass(frozen=True)
class GcnParams:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("one bias per GCN layer is required")
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError(f"GCN layer dimensions do not chain: {a.shape} then {b.shape}")

    @property
    def layers(self) -> int:
        return len(self.weights)


def init_gcn(in_dim: int, hidden: int, layers: int, rng: np.random.Generator) -> GcnParams:
    dims = [in_dim] + [hidden] * layers
    weights = tuple(rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out)) for d_in, d_out in zip(dims, dims[1:]))
    biases = tuple(np.zeros(hidden) for _ in range(layers))
    return GcnParams(weights, biases)


def gcn_forward(x, rel: np.ndarray, weights: Sequence, biases: Sequence):
    """``h <- relu(rel @ h @ W + b)`` applied once per layer.

    ``rel`` is row-stochastic, so each node aggregates the mean of itself and
    its neighbours before the affine map.
    """
    h = x
    for layer, (w, b) in enumerate(zip(weights, biases)):
        if ad.value_of(h).shape[-1] != ad.value_of(w).shape[0]:
            raise ValueError(
                f"GCN layer {layer}: input dimension {ad.value_of(h).shape[-1]} "
                f"does not match weight rows {ad.value_of(w).shape[0]}"
            )
        h = ad.relu(rel @ h @ w + b)
    return h


@dataclass(frozen=True)
class AttentionParams:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    delta_a: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.delta_a <= 1.0:
            raise ValueError(f"delta_a must lie in [0, 1], got {self.delta_a}")


def init_attention(dim: int, rng: np.random.Generator, delta_a: float = 0.5) -> AttentionParams:
    scale = np.sqrt(1.0 / dim)
    return AttentionParams(*(rng.normal(0.0, scale, size=(dim, dim)) for _ in range(3)), delta_a=delta_a)


def attention_mix(hidden, rel: np.ndarray, w_q, w_k, delta_a: float):
    """The blended attention matrix ``delta_a * softmax(QK^T/sqrt(d)) + (1 - delta_a) * rel``."""
    d = ad.value_of(w_k).shape[1]
    scores = (hidden @ w_q) @ ad.transpose(hidden @ w_k) * (1.0 / np.sqrt(d))
    alpha = ad.softmax(scores, axis=-1)
    return alpha * delta_a + rel * (1.0 - delta_a)


def refine_attention(hidden, rel: np.ndarray, params: AttentionParams | Mapping, delta_a: float | None = None, where: str = "attention"):
    if isinstance(params, AttentionParams):
        w_q, w_k, w_v, delta_a = params.w_q, params.w_k, params.w_v, params.delta_a
    else:
        w_q, w_k, w_v = params["w_q"], params["w_k"], params["w_v"]
    try:
        beta = attention_mix(hidden, rel, w_q, w_k, delta_a)
        return beta @ (hidden @ w_v)
    except ad.NonFiniteError as exc:
        raise ad.NonFiniteError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class EmbeddingSet:
    e_hat: np.ndarray
    s_hat: np.ndarray
    e_star: np.ndarray
    s_star: np.ndarray

    def __post_init__(self):
        for name in ("e_hat", "s_hat", "e_star", "s_star"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ad.NonFiniteError(f"non-finite entries in {name}")


class EmbeddingNetwork:
    """Two GCN towers (exercises, skills) with attention refinement.

    Parameters live in a flat dict under ``emb.*`` names so they can be
    merged into a cognitive-diagnosis model and trained with it. Layer-0
    inputs are one-hot identities, so the first layer reduces to
    ``rel @ W0``.
    """

    def __init__(self, rel: RelationMatrices, dim: int = 200, layers: int = 2, delta_a: float = 0.5, seed: int = 0):
        if layers < 1:
            raise ValueError("at least one GCN layer is required")
        self.rel = rel
        self.dim = dim
        self.layers = layers
        self.delta_a = delta_a
        self.seed = seed

    def init_params(self) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        params: dict[str, np.ndarray] = {}
        for side, n in (("ex", self.rel.r_e.shape[0]), ("sk", self.rel.r_s.shape[0])):
            gcn = init_gcn(n, self.dim, self.layers, rng)
            for i, (w, b) in enumerate(zip(gcn.weights, gcn.biases)):
                params[f"emb.{side}.gcn{i}.w"] = w
                params[f"emb.{side}.gcn{i}.b"] = b
            att = init_attention(self.dim, rng, self.delta_a)
            params[f"emb.{side}.att.w_q"] = att.w_q
            params[f"emb.{side}.att.w_k"] = att.w_k
            params[f"emb.{side}.att.w_v"] = att.w_v
        return params

    def _side(self, P: Mapping, side: str, rel: np.ndarray):
        ws = [P[f"emb.{side}.gcn{i}.w"] for i in range(self.layers)]
        bs = [P[f"emb.{side}.gcn{i}.b"] for i in range(self.layers)]
        # one-hot identity input: rel @ I @ W0 == rel @ W0
        h = ad.relu(rel @ ws[0] + bs[0])
        h = gcn_forward(h, rel, ws[1:], bs[1:])
        att = {k: P[f"emb.{side}.att.{k}"] for k in ("w_q", "w_k", "w_v")}
        where = "exercise attention" if side == "ex" else "skill attention"
        return h, refine_attention(h, rel, att, self.delta_a, where=where)

    def forward(self, P: Mapping):
        """Return ``(e_hat, s_hat, e_star, s_star)``; Vars in, Vars out."""
        e_hat, e_star = self._side(P, "ex", self.rel.r_e)
        s_hat, s_star = self._side(P, "sk", self.rel.r_s)
        return e_hat, s_hat, e_star, s_star

    def embed(self, P: Mapping) -> EmbeddingSet:
        values = {k: ad.value_of(v) for k, v in P.items()}
        return EmbeddingSet(*(np.asarray(ad.value_of(x)) for x in self.forward(values)))


def write_embeddings(path: str | Path, ids: Sequence[str], matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["entity_id", *(f"dim_{i}" for i in range(matrix.shape[1]))])
        for entity, row in zip(ids, matrix):
            writer.writerow([entity, *(repr(float(v)) for v in row)])


def read_embeddings(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = list(reader)
    return [r[0] for r in rows], np.array([[float(v) for v in r[1:]] for r in rows])
