"""
Knowledge graph store.

Loads, validates and saves knowledge graph files ("kg/1" JSON), ships the
default 20-compound graph, and provides the symbolic baseline that ranks
compounds purely by constituent recall.
"""

import json
import logging
from importlib import resources
from typing import Dict, Iterable, List, Tuple, Union

from pydantic import ValidationError

from app.api.schemas import CompoundSchema, ExtraEdgeSchema, KgFileSchema
from app.errors import KnowledgeGraphError
from app.graphs.traversal import validate_kg
from app.graphs.types import (
    BACKGROUND,
    KgEdge,
    KgNode,
    KgRelation,
    KnowledgeGraph,
    NodeKind,
    canonical_label,
)
from app.ingest.detections import load_json, schema_error

logger = logging.getLogger(__name__)

KG_VERSION = "kg/1"


def _kg_label(name: str, where: str) -> str:
    try:
        return canonical_label(name)
    except ValueError as e:
        raise KnowledgeGraphError(f"{e} in {where}") from None


def load_kg(data: Union[bytes, str]) -> KnowledgeGraph:
    """
    Parse and validate a knowledge graph file.

    Primitive nodes come first in declaration order, then compounds.
    Part-of edges run primitive -> compound.

    Raises:
        ParseError: Malformed JSON or schema
        KnowledgeGraphError: Unknown version, unknown concepts or
            validate_kg violations
    """
    raw = load_json(data, "knowledge graph")
    try:
        parsed = KgFileSchema.model_validate(raw)
    except ValidationError as e:
        raise schema_error("knowledge graph", e) from None

    if parsed.version != KG_VERSION:
        raise KnowledgeGraphError(f"unsupported knowledge graph version {parsed.version!r} (expected {KG_VERSION!r})")

    concepts = [_kg_label(c, "concepts") for c in parsed.concepts]
    compounds = [_kg_label(c.label, "compounds") for c in parsed.compounds]
    if BACKGROUND in concepts or BACKGROUND in compounds:
        raise KnowledgeGraphError(f"{BACKGROUND!r} is a reserved label")

    nodes = [KgNode(label, NodeKind.PRIMITIVE, i) for i, label in enumerate(concepts)]
    nodes += [KgNode(label, NodeKind.COMPOUND, len(concepts) + i) for i, label in enumerate(compounds)]
    primitive_index: Dict[str, int] = {}
    for node in nodes[: len(concepts)]:
        primitive_index.setdefault(node.label, node.index)
    any_index: Dict[str, int] = {}
    for node in nodes:
        any_index.setdefault(node.label, node.index)

    edges: List[KgEdge] = []
    for offset, compound in enumerate(parsed.compounds):
        compound_index = len(concepts) + offset
        weights = compound.weights or [1.0] * len(compound.constituents)
        if len(weights) != len(compound.constituents):
            raise KnowledgeGraphError(
                f"compound {compound.label!r}: {len(weights)} weights for {len(compound.constituents)} constituents"
            )
        for name, weight in zip(compound.constituents, weights):
            label = _kg_label(name, f"compound {compound.label!r}")
            if label not in primitive_index:
                raise KnowledgeGraphError(f"unknown concept {label!r} in compound {compound.label!r}")
            if weight <= 0:
                raise KnowledgeGraphError(f"compound {compound.label!r}: weight for {label!r} must be positive")
            edges.append(KgEdge(primitive_index[label], compound_index, KgRelation.PART_OF, float(weight)))

    for extra in parsed.extra_edges:
        where = f"extra edge {extra.src!r}->{extra.dst!r}"
        src, dst = _kg_label(extra.src, where), _kg_label(extra.dst, where)
        for label in (src, dst):
            if label not in any_index:
                raise KnowledgeGraphError(f"unknown concept {label!r} in extra edge {extra.src}->{extra.dst}")
        try:
            relation = KgRelation(extra.relation)
        except ValueError:
            raise KnowledgeGraphError(f"unknown relation {extra.relation!r}") from None
        edges.append(KgEdge(any_index[src], any_index[dst], relation))

    kg = KnowledgeGraph(tuple(nodes), tuple(edges))
    violations = validate_kg(kg)
    if violations:
        raise KnowledgeGraphError(
            "knowledge graph failed validation: " + "; ".join(str(v) for v in violations), violations
        )
    logger.debug("loaded knowledge graph: %d primitives, %d compounds, %d edges", len(concepts), len(compounds), len(edges))
    return kg


def save_kg(kg: KnowledgeGraph) -> bytes:
    """Serialize a knowledge graph back to the "kg/1" file format."""
    compounds = []
    for node in kg.compounds:
        parts = kg.constituents[node.index]
        weights = [w for _, w in parts]
        compounds.append(
            CompoundSchema(
                label=node.label,
                constituents=[kg.nodes[i].label for i, _ in parts],
                weights=None if all(w == 1.0 for w in weights) else weights,
            )
        )
    extra = [
        ExtraEdgeSchema(src=kg.nodes[e.src].label, dst=kg.nodes[e.dst].label, relation=e.relation.value)
        for e in kg.edges
        if e.relation != KgRelation.PART_OF
    ]
    schema = KgFileSchema(
        version=KG_VERSION,
        concepts=[n.label for n in kg.primitives],
        compounds=compounds,
        extra_edges=extra,
    )
    return schema.model_dump_json(indent=2, exclude_none=True).encode("utf-8")


def default_kg() -> KnowledgeGraph:
    """The packaged 20-compound scene knowledge graph."""
    data = resources.files("app.knowledge").joinpath("data/default_kg.json").read_bytes()
    return load_kg(data)


def symbolic_baseline(kg: KnowledgeGraph, labels: Iterable[str]) -> List[Tuple[str, float]]:
    """
    Rank compounds by constituent recall.

    score = sum of weights of detected constituents / sum of all constituent
    weights (plain |detected ∩ constituents| / |constituents| when unweighted).
    Ties go to the larger number of detected constituents, then to the
    lexicographically smaller label.

    Args:
        kg: Knowledge graph
        labels: Detected concept labels (duplicates allowed)

    Returns:
        [(compound label, score), ...] best first
    """
    detected = {canonical_label(label) for label in labels}
    ranked = []
    for node in kg.compounds:
        parts = kg.constituents[node.index]
        total = sum(w for _, w in parts)
        hits = [(i, w) for i, w in parts if kg.nodes[i].label in detected]
        score = sum(w for _, w in hits) / total if total > 0 else 0.0
        ranked.append((node.label, score, len(hits)))
    ranked.sort(key=lambda item: (-item[1], -item[2], item[0]))
    return [(label, score) for label, score, _ in ranked]


def symbolic_predict(kg: KnowledgeGraph, labels: Iterable[str]) -> str:
    """Top compound of the symbolic baseline, or background when nothing matches."""
    ranking = symbolic_baseline(kg, labels)
    if not ranking or ranking[0][1] <= 0.0:
        return BACKGROUND
    return ranking[0][0]
