"""Synthetic populations: DINA-style responses over a random typed skill graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ingest import InteractionLog, InteractionRecord, QMatrix
from ..knowledge_graph import ClassLevel, KnowledgeGraph, LearningObject, RelationEdge, RelationKind


@dataclass(frozen=True)
class SyntheticPopulation:
    log: InteractionLog
    q: QMatrix
    graph: KnowledgeGraph
    mastery: np.ndarray  # (students, skills) 0/1


def synthetic_graph(skill_ids: list[str], rng: np.random.Generator, edge_prob: float = 0.3) -> KnowledgeGraph:
    """A random DAG: one subject node above the skills, skills split into basic and task levels.

    Edges only run forward in the node order, so the graph is acyclic.
    """
    n_basic = max(1, len(skill_ids) // 3)
    nodes = {"subject": LearningObject("subject", "subject", ClassLevel.SUBJECT)}
    for i, k in enumerate(skill_ids):
        level = ClassLevel.BASIC if i < n_basic else ClassLevel.TASK
        nodes[k] = LearningObject(k, k, level)
    order = ["subject", *skill_ids]
    edges = []
    for k in skill_ids[:n_basic]:
        edges.append(RelationEdge("subject", k, RelationKind.IMPLEMENT))
    for a in range(1, len(order)):
        for b in range(a + 1, len(order)):
            if rng.random() >= edge_prob:
                continue
            src, dst = order[a], order[b]
            if nodes[src].class_level == nodes[dst].class_level:
                kind = (RelationKind.SUBCLASS, RelationKind.PRE_KNOWLEDGE)[int(rng.integers(2))]
            else:
                kind = (RelationKind.IMPLEMENT, RelationKind.APPLY_TO_BASIC)[int(rng.integers(2))]
            edges.append(RelationEdge(src, dst, kind))
    return KnowledgeGraph(nodes, tuple(edges))


def dina_population(
    n_students: int = 200,
    n_exercises: int = 100,
    n_skills: int = 10,
    slip: float = 0.1,
    guess: float = 0.1,
    max_skills: int = 3,
    skew: float = 0.0,
    seed: int = 0,
) -> SyntheticPopulation:
    """Every student answers every exercise once, in a random order.

    Mastery is driven by a latent ability and per-skill thresholds, so skills
    are correlated. Skills are drawn into exercises uniformly by default; a
    positive ``skew`` gives them Zipf-like popularity instead. An exercise is
    answered correctly with probability ``1 - slip`` when all of its skills
    are mastered and ``guess`` otherwise.
    """
    rng = np.random.default_rng(seed)
    width = len(str(max(n_students, n_exercises, n_skills) - 1))
    students = [f"s{i:0{width}d}" for i in range(n_students)]
    exercises = [f"e{i:0{width}d}" for i in range(n_exercises)]
    skills = [f"k{i:0{width}d}" for i in range(n_skills)]

    popularity = 1.0 / np.arange(1, n_skills + 1) ** skew
    popularity = popularity[rng.permutation(n_skills)]
    popularity /= popularity.sum()
    q = np.zeros((n_exercises, n_skills), dtype=np.int8)
    for j in range(n_exercises):
        size = int(rng.integers(1, max_skills + 1))
        q[j, rng.choice(n_skills, size=min(size, n_skills), replace=False, p=popularity)] = 1
    # make sure every skill is assessed somewhere
    for k in np.flatnonzero(q.sum(axis=0) == 0):
        q[int(rng.integers(n_exercises)), k] = 1

    ability = rng.normal(size=(n_students, 1))
    thresholds = rng.uniform(-1.0, 1.0, size=(1, n_skills))
    mastery = (ability + 0.8 * rng.normal(size=(n_students, n_skills)) > thresholds).astype(np.int8)
    eta = (mastery.astype(np.int64) @ q.T.astype(np.int64)) == q.sum(axis=1)[None, :]
    p_correct = np.where(eta, 1.0 - slip, guess)
    correct = (rng.random(p_correct.shape) < p_correct).astype(int)

    records = []
    for i, s in enumerate(students):
        for t, j in enumerate(rng.permutation(n_exercises)):
            records.append(InteractionRecord(s, exercises[j], int(correct[i, j]), t))
    return SyntheticPopulation(
        InteractionLog(tuple(records)),
        QMatrix(q, tuple(exercises), tuple(skills)),
        synthetic_graph(skills, rng),
        mastery,
    )
