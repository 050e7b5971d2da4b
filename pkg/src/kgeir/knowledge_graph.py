"""Multidimensional knowledge graph and learning-path extraction.

Learning objects live on three class levels (Subject, Basic, Task). Two
relation kinds link objects on the same level (Subclass, PreKnowledge) and
two cross levels (Implement, ApplyToBasic).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Mapping

from .ingest import DataError


class ClassLevel(IntEnum):
    SUBJECT = 0
    BASIC = 1
    TASK = 2


class RelationKind(str, Enum):
    SUBCLASS = "Subclass"
    IMPLEMENT = "Implement"
    PRE_KNOWLEDGE = "PreKnowledge"
    APPLY_TO_BASIC = "ApplyToBasic"

    @property
    def intra(self) -> bool:
        return self in (RelationKind.SUBCLASS, RelationKind.PRE_KNOWLEDGE)

    @property
    def scope(self) -> str:
        return "intra" if self.intra else "inter"


@dataclass(frozen=True)
class LearningObject:
    id: str
    label: str
    class_level: ClassLevel


@dataclass(frozen=True, order=True)
class RelationEdge:
    source: str
    target: str
    kind: RelationKind

    @property
    def scope(self) -> str:
        return self.kind.scope


@dataclass(frozen=True)
class RelationConstraint:
    """The set of relation kinds a learning path may follow."""

    allowed: frozenset[RelationKind]

    def __post_init__(self):
        if not self.allowed:
            raise ValueError("a relation constraint needs at least one kind; use unconstrained()")

    @classmethod
    def unconstrained(cls) -> "RelationConstraint":
        return cls(frozenset(RelationKind))

    @classmethod
    def of(cls, *kinds: str | RelationKind) -> "RelationConstraint":
        return cls(frozenset(RelationKind(k) for k in kinds))

    def admits(self, kind: RelationKind) -> bool:
        return kind in self.allowed


# learner need -> relation constraint
NEED_PRESETS: dict[str, RelationConstraint] = {
    "all": RelationConstraint.unconstrained(),
    "prerequisite": RelationConstraint.of(RelationKind.PRE_KNOWLEDGE, RelationKind.SUBCLASS),
    "application": RelationConstraint.of(RelationKind.IMPLEMENT, RelationKind.APPLY_TO_BASIC),
    "hierarchy": RelationConstraint.of(RelationKind.SUBCLASS, RelationKind.IMPLEMENT),
}


def constraint_for_need(need: str) -> RelationConstraint:
    try:
        return NEED_PRESETS[need]
    except KeyError:
        raise ValueError(f"unknown learner need {need!r}; choose from {sorted(NEED_PRESETS)}") from None


@dataclass(frozen=True)
class KnowledgeGraph:
    nodes: dict[str, LearningObject]
    edges: tuple[RelationEdge, ...]
    adjacency: dict[str, tuple[RelationEdge, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        out: dict[str, list[RelationEdge]] = defaultdict(list)
        for edge in self.edges:
            for end in (edge.source, edge.target):
                if end not in self.nodes:
                    raise DataError(f"edge {edge} references unknown node {end!r}")
            same_level = self.nodes[edge.source].class_level == self.nodes[edge.target].class_level
            if edge.kind.intra and not same_level:
                raise DataError(f"intra-class {edge.kind.value} edge {edge.source}->{edge.target} crosses class levels")
            if not edge.kind.intra and same_level:
                raise DataError(f"inter-class {edge.kind.value} edge {edge.source}->{edge.target} stays within one level")
            out[edge.source].append(edge)
        adjacency = {n: tuple(sorted(out.get(n, ()), key=lambda e: (e.target, e.kind.value))) for n in self.nodes}
        object.__setattr__(self, "adjacency", adjacency)

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "label": n.label, "class_level": int(n.class_level)}
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "edges": [{"from": e.source, "to": e.target, "kind": e.kind.value} for e in sorted(self.edges)],
        }


def _parse_level(raw) -> ClassLevel:
    if isinstance(raw, str) and not raw.isdigit():
        try:
            return ClassLevel[raw.upper()]
        except KeyError:
            raise DataError(f"unknown class level {raw!r}") from None
    try:
        return ClassLevel(int(raw))
    except ValueError:
        raise DataError(f"unknown class level {raw!r}") from None


def graph_from_dict(data: Mapping) -> KnowledgeGraph:
    nodes: dict[str, LearningObject] = {}
    for raw in data.get("nodes", []):
        node_id = str(raw["id"])
        if node_id in nodes:
            raise DataError(f"duplicate node id {node_id!r}")
        nodes[node_id] = LearningObject(node_id, str(raw.get("label", node_id)), _parse_level(raw["class_level"]))
    edges = []
    for raw in data.get("edges", []):
        try:
            kind = RelationKind(raw["kind"])
        except ValueError:
            raise DataError(f"unknown relation kind {raw['kind']!r}") from None
        edges.append(RelationEdge(str(raw["from"]), str(raw["to"]), kind))
    return KnowledgeGraph(nodes, tuple(dict.fromkeys(edges)))


def load_graph(path: str | Path) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"graph file is not valid JSON: {exc}") from None
    return graph_from_dict(data)


def write_graph(kg: KnowledgeGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(kg.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def get_relations(kg: KnowledgeGraph, kc: str) -> list[RelationEdge]:
    """Outgoing edges of ``kc`` sorted by target id, then kind."""
    if kc not in kg.nodes:
        raise KeyError(f"unknown learning object {kc!r}")
    return list(kg.adjacency[kc])


LearningPath = tuple[str, ...]


@dataclass(frozen=True)
class PathSet:
    paths: tuple[LearningPath, ...]
    occurrences: dict[str, tuple[tuple[int, int], ...]] = field(init=False, repr=False)

    def __post_init__(self):
        occ: dict[str, list[tuple[int, int]]] = defaultdict(list)
        for p_idx, path in enumerate(self.paths):
            for level, node in enumerate(path):
                occ[node].append((p_idx, level))
        object.__setattr__(self, "occurrences", {k: tuple(v) for k, v in occ.items()})

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def containing(self, kc: str) -> list[LearningPath]:
        return [self.paths[i] for i, _ in self.occurrences.get(kc, ())]

    @classmethod
    def union(cls, parts: Iterable["PathSet"]) -> "PathSet":
        return cls(tuple(sorted({p for part in parts for p in part.paths})))


def find_all_paths(kg: KnowledgeGraph, target: str, phi: RelationConstraint | None = None) -> PathSet:
    """All maximal constraint-respecting simple paths starting at ``target``.

    Depth-first search from the target; a path is recorded when its last node
    has no admissible successor outside the path. The per-path visited set
    guarantees termination on cyclic graphs.
    """
    if target not in kg.nodes:
        raise KeyError(f"unknown learning object {target!r}")
    phi = phi or RelationConstraint.unconstrained()
    successors = {
        n: sorted({e.target for e in edges if phi.admits(e.kind)}) for n, edges in kg.adjacency.items()
    }
    found: set[LearningPath] = set()
    path = [target]
    on_path = {target}
    # explicit stack of successor iterators keeps deep graphs off the recursion limit
    stack = [iter(successors[target])]
    extended = [False]
    while stack:
        nxt = next((n for n in stack[-1] if n not in on_path), None)
        if nxt is None:
            if not extended[-1]:
                found.add(tuple(path))
            stack.pop()
            extended.pop()
            on_path.discard(path.pop())
            continue
        extended[-1] = True
        path.append(nxt)
        on_path.add(nxt)
        stack.append(iter(successors[nxt]))
        extended.append(False)
    return PathSet(tuple(sorted(found)))


def level_in_path(path: LearningPath, kc: str) -> int:
    try:
        return list(path).index(kc)
    except ValueError:
        raise KeyError(f"{kc!r} does not occur in path {path}") from None


def root_nodes(kg: KnowledgeGraph, phi: RelationConstraint | None = None) -> list[str]:
    """Nodes with no admissible incoming edge; every node if the graph has none."""
    phi = phi or RelationConstraint.unconstrained()
    has_incoming = {e.target for e in kg.edges if phi.admits(e.kind)}
    roots = sorted(n for n in kg.nodes if n not in has_incoming)
    return roots or sorted(kg.nodes)


def extract_paths(
    kg: KnowledgeGraph, phi: RelationConstraint | None = None, targets: Iterable[str] | None = None
) -> PathSet:
    """Union of the learning paths from each target (default: the root nodes)."""
    targets = root_nodes(kg, phi) if targets is None else list(targets)
    return PathSet.union(find_all_paths(kg, t, phi) for t in targets)
