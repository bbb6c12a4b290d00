"""
Graph types shared by every pipeline stage.

- SceneGraph: detected instances with typed spatial edges
- KnowledgeGraph: primitive and compound concepts with relational edges
- MergedGraph: both graphs under one global id space plus link edges
- ActiveSet: the part of the merged graph a search currently considers
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, NewType, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from app.errors import ContractViolation

ConceptLabel = NewType("ConceptLabel", str)

BBox = Tuple[float, float, float, float]


def canonical_label(name: str) -> ConceptLabel:
    """Strip and lowercase; empty labels are rejected."""
    label = (name or "").strip().lower()
    if not label:
        raise ValueError("concept label must be non-empty")
    return ConceptLabel(label)


class SpatialRelation(str, Enum):
    LEFT_OF = "left-of"
    RIGHT_OF = "right-of"
    ABOVE = "above"
    BELOW = "below"
    OVERLAPS = "overlaps"
    CONTAINS = "contains"
    INSIDE = "inside"
    NEAR = "near"

    def __str__(self) -> str:
        return self.value

    @property
    def converse(self) -> "SpatialRelation":
        return _CONVERSE.get(self, self)


_CONVERSE = {
    SpatialRelation.LEFT_OF: SpatialRelation.RIGHT_OF,
    SpatialRelation.RIGHT_OF: SpatialRelation.LEFT_OF,
    SpatialRelation.ABOVE: SpatialRelation.BELOW,
    SpatialRelation.BELOW: SpatialRelation.ABOVE,
    SpatialRelation.CONTAINS: SpatialRelation.INSIDE,
    SpatialRelation.INSIDE: SpatialRelation.CONTAINS,
}


class KgRelation(str, Enum):
    PART_OF = "part-of"
    AFFORDS = "affords"
    RELATED_TO = "related-to"

    def __str__(self) -> str:
        return self.value


class NodeKind(str, Enum):
    PRIMITIVE = "primitive"
    COMPOUND = "compound"

    def __str__(self) -> str:
        return self.value


LINK_EDGE = "link"

# Class label for scenes whose constituents match no compound.
BACKGROUND = "background"

# Edge-type vocabulary for the propagation network: 8 spatial kinds,
# 3 KG relations, then the SG↔KG link edge.
EDGE_TYPES: Tuple[str, ...] = (
    tuple(r.value for r in SpatialRelation)
    + tuple(r.value for r in KgRelation)
    + (LINK_EDGE,)
)
EDGE_TYPE_INDEX: Dict[str, int] = {name: i for i, name in enumerate(EDGE_TYPES)}


@dataclass(frozen=True, eq=False)
class SgNode:
    """One detected concept instance."""

    index: int
    label: ConceptLabel
    bbox: BBox
    confidence: float
    embedding: np.ndarray

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise ContractViolation(f"SG node {self.index}: bbox {self.bbox} is not well-ordered")
        if not 0.0 <= self.confidence <= 1.0:
            raise ContractViolation(f"SG node {self.index}: confidence {self.confidence} outside [0,1]")

    @property
    def center(self) -> Tuple[float, float]:
        x0, y0, x1, y1 = self.bbox
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))

    @property
    def name(self) -> str:
        return f"{self.label}#{self.index}"


@dataclass(frozen=True)
class SgEdge:
    src: int
    dst: int
    relation: SpatialRelation


@dataclass(frozen=True, eq=False)
class SceneGraph:
    """
    Scene graph S: nodes plus directed spatial edges.

    Every directional edge is stored together with its converse.
    """

    nodes: Tuple[SgNode, ...]
    edges: Tuple[SgEdge, ...]

    def __post_init__(self):
        n = len(self.nodes)
        for i, node in enumerate(self.nodes):
            if node.index != i:
                raise ContractViolation(f"SG node at position {i} has index {node.index}")
        stored = set()
        for e in self.edges:
            if not (0 <= e.src < n and 0 <= e.dst < n):
                raise ContractViolation(f"SG edge {e} has an invalid endpoint")
            if e.src == e.dst:
                raise ContractViolation(f"SG self-edge on node {e.src}")
            stored.add((e.src, e.dst, e.relation))
        for src, dst, rel in stored:
            if (dst, src, rel.converse) not in stored:
                raise ContractViolation(f"SG edge ({src},{dst},{rel}) lacks its converse")

    @property
    def labels(self) -> List[ConceptLabel]:
        return [node.label for node in self.nodes]


@dataclass(frozen=True)
class KgNode:
    label: ConceptLabel
    kind: NodeKind
    index: int


@dataclass(frozen=True)
class KgEdge:
    src: int
    dst: int
    relation: KgRelation
    weight: float = 1.0


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """
    Domain knowledge graph K.

    Not validated on construction; run validate_kg (load_kg does).
    """

    nodes: Tuple[KgNode, ...]
    edges: Tuple[KgEdge, ...]

    @cached_property
    def label_index(self) -> Dict[ConceptLabel, int]:
        return {node.label: node.index for node in self.nodes}

    def node(self, label: str) -> KgNode:
        return self.nodes[self.label_index[canonical_label(label)]]

    @property
    def compounds(self) -> List[KgNode]:
        return [n for n in self.nodes if n.kind == NodeKind.COMPOUND]

    @property
    def primitives(self) -> List[KgNode]:
        return [n for n in self.nodes if n.kind == NodeKind.PRIMITIVE]

    @cached_property
    def constituents(self) -> Dict[int, Tuple[Tuple[int, float], ...]]:
        """Compound node index -> ((primitive index, weight), ...) from part-of edges."""
        parts: Dict[int, List[Tuple[int, float]]] = {n.index: [] for n in self.compounds}
        for e in self.edges:
            if e.relation == KgRelation.PART_OF and e.dst in parts:
                parts[e.dst].append((e.src, e.weight))
        return {k: tuple(v) for k, v in parts.items()}

    def constituent_labels(self, compound: str) -> List[ConceptLabel]:
        node = self.node(compound)
        return [self.nodes[i].label for i, _ in self.constituents.get(node.index, ())]


@dataclass(frozen=True, eq=False)
class MergedGraph:
    """
    Merged graph M: every SG and KG node under one global id space.

    SG node i has global id i; KG node j has global id |S| + j.
    """

    sg: SceneGraph
    kg: KnowledgeGraph
    link_edges: Tuple[Tuple[int, int], ...]  # (sg index, kg index)

    @property
    def num_sg(self) -> int:
        return len(self.sg.nodes)

    @property
    def num_nodes(self) -> int:
        return len(self.sg.nodes) + len(self.kg.nodes)

    def kg_global(self, kg_index: int) -> int:
        return self.num_sg + kg_index

    def is_sg(self, node_id: int) -> bool:
        return 0 <= node_id < self.num_sg

    def is_kg(self, node_id: int) -> bool:
        return self.num_sg <= node_id < self.num_nodes

    def check_id(self, node_id: int) -> None:
        if not 0 <= node_id < self.num_nodes:
            raise ContractViolation(f"node id {node_id} outside merged graph of {self.num_nodes} nodes")

    def label_of(self, node_id: int) -> ConceptLabel:
        self.check_id(node_id)
        if self.is_sg(node_id):
            return self.sg.nodes[node_id].label
        return self.kg.nodes[node_id - self.num_sg].label

    def describe(self, node_id: int) -> str:
        """'stove#0' for SG nodes, 'kg:stove' for KG nodes."""
        self.check_id(node_id)
        if self.is_sg(node_id):
            return self.sg.nodes[node_id].name
        return f"kg:{self.kg.nodes[node_id - self.num_sg].label}"

    @cached_property
    def graph(self) -> nx.Graph:
        """Undirected adjacency over global ids (all edges traversable both ways)."""
        g = nx.Graph()
        g.add_nodes_from(range(self.num_nodes))
        g.add_edges_from((e.src, e.dst) for e in self.sg.edges)
        g.add_edges_from((self.kg_global(e.src), self.kg_global(e.dst)) for e in self.kg.edges)
        g.add_edges_from((s, self.kg_global(k)) for s, k in self.link_edges)
        return g

    @cached_property
    def incoming(self) -> Tuple[Tuple[Tuple[int, int], ...], ...]:
        """
        Per node, the messages it can receive as (source id, edge type index).

        A directed SG edge (u, v, kind) carries u→v typed kind; its converse
        edge carries the other direction. KG and link edges carry both ways.
        """
        inbox: List[List[Tuple[int, int]]] = [[] for _ in range(self.num_nodes)]
        for e in self.sg.edges:
            inbox[e.dst].append((e.src, EDGE_TYPE_INDEX[e.relation.value]))
        for e in self.kg.edges:
            src, dst = self.kg_global(e.src), self.kg_global(e.dst)
            if src == dst:
                continue
            t = EDGE_TYPE_INDEX[e.relation.value]
            inbox[dst].append((src, t))
            inbox[src].append((dst, t))
        link = EDGE_TYPE_INDEX[LINK_EDGE]
        for s, k in self.link_edges:
            g = self.kg_global(k)
            inbox[g].append((s, link))
            inbox[s].append((g, link))
        return tuple(tuple(box) for box in inbox)

    @cached_property
    def compound_ids(self) -> Tuple[int, ...]:
        """Global ids of compound KG nodes in KG order (class order after background)."""
        return tuple(self.kg_global(n.index) for n in self.kg.compounds)


@dataclass(frozen=True)
class ActiveSet:
    """
    Active subgraph of M at iteration t, with its 1-hop frontier.

    seed is the SG node the round was started from, when known.
    """

    active: FrozenSet[int]
    iteration: int = 0
    frontier: FrozenSet[int] = field(default_factory=frozenset)
    seed: Optional[int] = field(default=None, compare=False)

    @classmethod
    def create(
        cls,
        merged: MergedGraph,
        active: Iterable[int],
        iteration: int = 0,
        seed: Optional[int] = None,
    ) -> "ActiveSet":
        from app.graphs.traversal import compute_frontier

        active_set = frozenset(active)
        for node_id in active_set:
            merged.check_id(node_id)
        return cls(active_set, iteration, frozenset(compute_frontier(merged, active_set)), seed)

    def grow(self, merged: MergedGraph, added: Iterable[int]) -> "ActiveSet":
        return ActiveSet.create(merged, self.active | frozenset(added), self.iteration + 1, self.seed)

    def __len__(self) -> int:
        return len(self.active)

    def sorted_ids(self) -> List[int]:
        return sorted(self.active)
