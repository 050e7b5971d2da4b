"""Brute-force reference implementations and random instance generators used by the tests."""

from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np

from kgeir.knowledge_graph import ClassLevel, KnowledgeGraph, LearningObject, RelationConstraint, RelationEdge, RelationKind

INTRA = (RelationKind.SUBCLASS, RelationKind.PRE_KNOWLEDGE)
INTER = (RelationKind.IMPLEMENT, RelationKind.APPLY_TO_BASIC)


def random_typed_dag(rng: np.random.Generator, max_nodes: int = 12, max_edges: int = 20) -> KnowledgeGraph:
    """Nodes on random class levels; edges only go from lower to higher index, with a level-compatible kind."""
    n = int(rng.integers(1, max_nodes + 1))
    ids = [f"n{i:02d}" for i in range(n)]
    levels = rng.integers(0, 3, size=n)
    nodes = {k: LearningObject(k, k, ClassLevel(int(levels[i]))) for i, k in enumerate(ids)}
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = min(len(pairs), int(rng.integers(0, max_edges + 1)))
    chosen = rng.choice(len(pairs), size=m, replace=False) if m else []
    edges = []
    for c in chosen:
        i, j = pairs[int(c)]
        kinds = INTRA if levels[i] == levels[j] else INTER
        edges.append(RelationEdge(ids[i], ids[j], kinds[int(rng.integers(2))]))
    return KnowledgeGraph(nodes, tuple(edges))


def random_constraint(rng: np.random.Generator) -> RelationConstraint:
    kinds = list(RelationKind)
    mask = rng.random(len(kinds)) < 0.6
    if not mask.any():
        mask[int(rng.integers(len(kinds)))] = True
    return RelationConstraint(frozenset(k for k, keep in zip(kinds, mask) if keep))


def brute_force_paths(kg: KnowledgeGraph, target: str, phi: RelationConstraint) -> set[tuple[str, ...]]:
    """Every simple path from ``target`` over admissible edges that cannot be extended."""
    g = nx.DiGraph()
    g.add_nodes_from(kg.nodes)
    g.add_edges_from((e.source, e.target) for e in kg.edges if phi.admits(e.kind))
    candidates = {(target,)}
    for end in g.nodes:
        if end != target:
            candidates.update(tuple(p) for p in nx.all_simple_paths(g, target, end))
    return {p for p in candidates if all(s in p for s in g.successors(p[-1]))}


def exhaustive_best_ewkc(rows: np.ndarray, weights: np.ndarray, base: np.ndarray, budget: int, ewkc) -> float:
    """Best coverage value over every subset of at most ``budget`` rows."""
    best = ewkc(base)
    for size in range(1, budget + 1):
        for subset in itertools.combinations(range(len(rows)), size):
            best = max(best, ewkc(base + rows[list(subset)].sum(axis=0)))
    return best


def one_minus_inv_e() -> float:
    return 1.0 - 1.0 / math.e
