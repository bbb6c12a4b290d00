"""
Graph model: scene graph, knowledge graph, merged graph and active set.

Public API:
    - SceneGraph, SgNode, SgEdge, SpatialRelation
    - KnowledgeGraph, KgNode, KgEdge, KgRelation, NodeKind
    - MergedGraph, ActiveSet
    - neighbors(), compute_frontier(), validate_kg()
"""

from app.graphs.traversal import KgViolation, compute_frontier, neighbors, validate_kg
from app.graphs.types import (
    EDGE_TYPE_INDEX,
    BACKGROUND,
    EDGE_TYPES,
    LINK_EDGE,
    ActiveSet,
    BBox,
    ConceptLabel,
    KgEdge,
    KgNode,
    KgRelation,
    KnowledgeGraph,
    MergedGraph,
    NodeKind,
    SceneGraph,
    SgEdge,
    SgNode,
    SpatialRelation,
    canonical_label,
)

__all__ = [
    "BACKGROUND",
    "EDGE_TYPES",
    "EDGE_TYPE_INDEX",
    "LINK_EDGE",
    "ActiveSet",
    "BBox",
    "ConceptLabel",
    "KgEdge",
    "KgNode",
    "KgRelation",
    "KgViolation",
    "KnowledgeGraph",
    "MergedGraph",
    "NodeKind",
    "SceneGraph",
    "SgEdge",
    "SgNode",
    "SpatialRelation",
    "canonical_label",
    "compute_frontier",
    "neighbors",
    "validate_kg",
]
