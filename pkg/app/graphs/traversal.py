"""Neighborhoods, frontiers and knowledge graph validation."""

from dataclasses import dataclass
from typing import AbstractSet, Dict, List, Set

from app.graphs.types import KgRelation, KnowledgeGraph, MergedGraph, NodeKind


def neighbors(merged: MergedGraph, node_id: int) -> Set[int]:
    """
    All nodes sharing an SG, KG or link edge with node_id, in either direction.

    Raises:
        ContractViolation: node_id is not in the merged graph
    """
    merged.check_id(node_id)
    return set(merged.graph.neighbors(node_id))


def compute_frontier(merged: MergedGraph, active: AbstractSet[int]) -> Set[int]:
    """Nodes adjacent to the active set but not in it."""
    frontier: Set[int] = set()
    adjacency = merged.graph.adj
    for node_id in active:
        frontier.update(adjacency[node_id])
    return frontier - set(active)


@dataclass(frozen=True)
class KgViolation:
    code: str  # "duplicate label" | "part-of direction" | "empty compound" | "dangling index" | "empty label"
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate_kg(kg: KnowledgeGraph) -> List[KgViolation]:
    """
    Check knowledge graph invariants.

    Returns:
        List of violations; empty means the graph is valid
    """
    violations: List[KgViolation] = []
    n = len(kg.nodes)

    seen: Dict[str, int] = {}
    for position, node in enumerate(kg.nodes):
        if node.index != position:
            violations.append(KgViolation("dangling index", f"node {node.label!r} at {position} claims index {node.index}"))
        if not node.label:
            violations.append(KgViolation("empty label", f"node at {position} has no label"))
        if node.label in seen:
            violations.append(KgViolation("duplicate label", f"{node.label!r} at {seen[node.label]} and {position}"))
        else:
            seen[node.label] = position

    part_counts = {node.index: 0 for node in kg.nodes if node.kind == NodeKind.COMPOUND}
    for e in kg.edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            violations.append(KgViolation("dangling index", f"edge {e.src}->{e.dst} ({e.relation}) points outside {n} nodes"))
            continue
        if e.relation != KgRelation.PART_OF:
            continue
        src, dst = kg.nodes[e.src], kg.nodes[e.dst]
        if src.kind != NodeKind.PRIMITIVE or dst.kind != NodeKind.COMPOUND:
            violations.append(KgViolation("part-of direction", f"{src.label!r} ({src.kind}) -> {dst.label!r} ({dst.kind})"))
            continue
        part_counts[dst.index] += 1

    for index, count in part_counts.items():
        if count == 0:
            violations.append(KgViolation("empty compound", f"{kg.nodes[index].label!r} has no constituents"))

    return violations
