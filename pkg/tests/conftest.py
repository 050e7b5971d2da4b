import numpy as np
import pytest

from kgeir.ingest import InteractionLog, InteractionRecord, QMatrix
from kgeir.knowledge_graph import ClassLevel, KnowledgeGraph, LearningObject, RelationEdge, RelationKind


@pytest.fixture
def small_q():
    entries = np.array(
        [
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 0],
            [0, 1, 1],
            [0, 0, 1],
        ]
    )
    return QMatrix(entries, ("e0", "e1", "e2", "e3", "e4"), ("k0", "k1", "k2"))


@pytest.fixture
def small_log():
    rows = [
        ("s0", "e0", 1, 0), ("s0", "e1", 0, 1), ("s0", "e2", 1, 2), ("s0", "e3", 0, 3), ("s0", "e4", 1, 4),
        ("s1", "e4", 0, 0), ("s1", "e2", 1, 1), ("s1", "e0", 1, 2), ("s1", "e1", 1, 3), ("s1", "e3", 0, 4),
        ("s2", "e1", 0, 0), ("s2", "e3", 1, 1), ("s2", "e0", 0, 2), ("s2", "e2", 1, 3),
    ]
    return InteractionLog(tuple(InteractionRecord(*r) for r in rows))


@pytest.fixture
def small_graph():
    nodes = {
        "math": LearningObject("math", "Math", ClassLevel.SUBJECT),
        "k0": LearningObject("k0", "Numbers", ClassLevel.BASIC),
        "k1": LearningObject("k1", "Fractions", ClassLevel.BASIC),
        "k2": LearningObject("k2", "Ratio problems", ClassLevel.TASK),
    }
    edges = (
        RelationEdge("math", "k0", RelationKind.IMPLEMENT),
        RelationEdge("k0", "k1", RelationKind.PRE_KNOWLEDGE),
        RelationEdge("k1", "k2", RelationKind.APPLY_TO_BASIC),
        RelationEdge("k0", "k2", RelationKind.IMPLEMENT),
    )
    return KnowledgeGraph(nodes, edges)
